#include <doctest.h>

#include <fracdecay/commands.hpp>
#include <fracdecay/config.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fracdecay;
using namespace fracdecay::config;

namespace {

KeyValues parse(const std::string& text)
{
    std::istringstream in(text);
    return KeyValues::parse(in, "test.cfg");
}

std::string error_of(const std::string& text)
{
    try {
        resolve(parse(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string read(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string scratch_dir(const std::string& name)
{
    const auto d = std::filesystem::temp_directory_path() / ("fracdecay_test_" + name);
    std::filesystem::remove_all(d);
    return d.string();
}

} // namespace

TEST_CASE("comments, blanks and whitespace")
{
    const auto kv = parse("# header\n\n  emitter.beta = 1e-7   # trailing\nloss.delta=0 1e-9\n");
    REQUIRE(kv.find("emitter.beta"));
    CHECK(kv.find("emitter.beta")->value == "1e-7");
    CHECK(kv.find("emitter.beta")->line == 3);
    const auto c = resolve(kv);
    CHECK(c.beta == 1e-7);
    CHECK(c.loss_delta == std::vector<double>{0.0, 1e-9});
}

TEST_CASE("errors name the file and line")
{
    CHECK(error_of("emitter.beta = 1e-7\nfoo.bar = 3\n") == "test.cfg:2: foo.bar: unknown key");
    CHECK(error_of("\n\nemitter.beta = fast\n").rfind("test.cfg:3: emitter.beta:", 0) == 0);
    CHECK(error_of("basis.count = 12.5\n").rfind("test.cfg:1: basis.count:", 0) == 0);
    CHECK(error_of("kmesh.half_zone = maybe\n").rfind("test.cfg:1:", 0) == 0);
    CHECK_THROWS_WITH_AS(parse("# ok\nno equals sign\n"), doctest::Contains("test.cfg:2:"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("a.b = 1\na.b = 2\n"), doctest::Contains("test.cfg:2: a.b: repeated"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("beta = 1\n"), doctest::Contains("malformed key"), ConfigError);
}

TEST_CASE("geometry range checks")
{
    const auto e = error_of("# geometry\nlattice.r_over_a = 0.6\n");
    CHECK(e.rfind("test.cfg:2: lattice.r_over_a:", 0) == 0);
    CHECK(e.find("overlap range") != std::string::npos);
    CHECK(error_of("lattice.eps_real = 0.5\n").rfind("test.cfg:1:", 0) == 0);
    CHECK(error_of("lattice.eps_imag = -1e-3\n").rfind("test.cfg:1:", 0) == 0);
    CHECK(error_of("emitter.detuning = 0.9\n").rfind("test.cfg:1:", 0) == 0);
}

TEST_CASE("cross-key checks point at the dependent key")
{
    CHECK(error_of("ldos.omega_min = 0.8\n\nldos.omega_max = 0.7\n").rfind("test.cfg:3: ldos.omega_max:", 0) == 0);
    CHECK(error_of("loss.delta = 0 1e-9\nloss.alpha_label = a\n").rfind("test.cfg:2: loss.alpha_label:", 0) == 0);
    CHECK(error_of("ldos.orientations = z sideways\n").rfind("test.cfg:1: ldos.orientations:", 0) == 0);
    CHECK(error_of("kbe.path = Gamma Q\n").rfind("test.cfg:1: kbe.path:", 0) == 0);
}

TEST_CASE("every preset resolves and round-trips through the resolved dump")
{
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const auto c = resolve(preset(name));
        CHECK(c.figure == name);
        std::ostringstream dump;
        write_resolved(dump, c);
        const auto again = resolve(parse(dump.str()));
        std::ostringstream dump2;
        write_resolved(dump2, again);
        CHECK(dump.str() == dump2.str());
    }
    CHECK_THROWS_AS(preset("fig9"), ConfigError);
}

TEST_CASE("preset values")
{
    const auto f3 = resolve(preset("fig3"));
    CHECK(f3.beta * f3.k_be == doctest::Approx(5.5e-7));
    CHECK(f3.loss_delta == std::vector<double>{0.0, 1e-10, 1e-9});
    CHECK(f3.k_be_source == KbeSource::direct);
    const auto f2 = resolve(preset("fig2"));
    CHECK(f2.lattice.r_over_a == 0.3436);
    CHECK(f2.lattice.eps_backbone_real == 11.76);
    const auto f1 = resolve(preset("fig1"));
    CHECK(f1.basis_count == 169);
    CHECK(f1.ldos_position == "H");
}

TEST_CASE("later layers override earlier ones and keep their origin")
{
    auto kv = preset("fig3");
    kv.merge(parse("emitter.beta = 1e-9\n"));
    kv.set("run.threads", "3", "--threads");
    const auto c = resolve(kv);
    CHECK(c.beta == 1e-9);
    CHECK(c.threads == 3u);
    CHECK(kv.find("emitter.k_be")->origin == "preset fig3");
    kv.set("run.threads", "-2", "--threads");
    CHECK_THROWS_WITH_AS(resolve(kv), doctest::Contains("--threads: run.threads"), ConfigError);
}

TEST_CASE("Wigner-Seitz labels can be overridden")
{
    const auto c = resolve(parse("positions.H = 0.5 0.1 0\nldos.position = H\n"));
    CHECK((parse_position(c, "H") - vec3(0.5, 0.1, 0)).norm() == 0.0);
    CHECK((parse_position(c, "0.1 0.2 0.3") - vec3(0.1, 0.2, 0.3)).norm() == 0.0);
    CHECK((parse_position(c, "Gamma")).norm() == 0.0);
    CHECK(error_of("positions.H = 1 2\n").rfind("test.cfg:1: positions.H:", 0) == 0);
    CHECK((parse_orientation("1 1 0") - vec3(1, 1, 0).normalized()).norm() < 1e-15);
    CHECK(parse_orientation("trace").norm() == 0.0);
}

TEST_CASE("bands command on the empty lattice")
{
    auto kv = preset("empty-lattice");
    kv.set("output.dir", scratch_dir("bands"), "test");
    kv.set("bands.points_per_segment", "4", "test");
    const auto c = resolve(kv);
    const auto r = commands::bands(c);
    REQUIRE(r.files.size() == 1);
    const auto text = read(r.files[0]);
    CHECK(text.rfind("# fracdecay bands\n", 0) == 0);
    CHECK(text.find("# param lattice.r_over_a = 0\n") != std::string::npos);
    const auto at = text.find("empty_lattice_max_rel_error = ");
    REQUIRE(at != std::string::npos);
    CHECK(std::stod(text.substr(at + 30)) < 1e-10);
    // rows: k_index band kx ky kz omega; 21 k-points x 12 bands
    std::istringstream in(text);
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 21 * 12);
}

TEST_CASE("decay command writes one file per loss with the strength in the header")
{
    auto kv = preset("fig3");
    kv.set("output.dir", scratch_dir("decay"), "test");
    kv.set("dynamics.n_times", "5", "test");
    const auto c = resolve(kv);
    const auto r = commands::decay(c);
    REQUIRE(r.files.size() == 3);
    for (const auto& f : r.files) {
        const auto text = read(f);
        CHECK(text.find("# result strength = ") != std::string::npos);
        CHECK(text.find("# columns: t population pole_part\n") != std::string::npos);
    }
}

TEST_CASE("df-scan rows are nonincreasing in the coupling")
{
    auto kv = preset("fig4");
    kv.set("output.dir", scratch_dir("df"), "test");
    kv.set("loss.delta", "1e-9", "test");
    kv.set("loss.alpha_label", "3e-5", "test");
    kv.set("df.points", "4", "test");
    const auto r = commands::df_scan(resolve(kv));
    REQUIRE(r.files.size() == 1);
    std::istringstream in(read(r.files[0]));
    std::vector<double> d;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        double bk, df, det;
        row >> bk >> df >> det;
        d.push_back(df);
    }
    REQUIRE(d.size() == 4);
    for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] <= d[i - 1]);
}
