#include <catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "ptherm/config.hpp"

using namespace ptherm;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

using Pairs = std::vector<std::pair<std::string, std::string>>;

TEST_CASE("config text parsing", "[config]") {
    const auto kv = parse_config_text("# comment\n\nlambda = 0.5   # trailing\n  coupling.ax=1\r\noutput = out.csv\n");
    REQUIRE(kv.size() == 3);
    CHECK(kv[0] == std::pair<std::string, std::string>{"lambda", "0.5"});
    CHECK(kv[1] == std::pair<std::string, std::string>{"coupling.ax", "1"});
    CHECK(kv[2].second == "out.csv");

    CHECK_THROWS_WITH(parse_config_text("lambda = 1\ndepth 4\n"), ContainsSubstring("line 2"));
    CHECK_THROWS_AS(parse_config_text(" = 3\n"), ConfigError);
    CHECK_THROWS_AS(read_text_file("/nonexistent/ptherm.conf"), ConfigError);
}

TEST_CASE("minimal config picks up defaults", "[config]") {
    const auto c = resolve_config(parse_config_text("lambda = 5\ncoupling.ax = 1\n"), {});
    CHECK(c.lambda == 5.0);
    CHECK(c.coupling == Eigen::Vector3d(1.0, 0.0, 0.0));
    CHECK(c.omega0 == 1.0);
    CHECK(c.temperature == 1.5);
    CHECK(c.gamma_drude == 1.0);
    CHECK(c.dt == 0.0);
    CHECK(c.initial_state == "psi1");
    CHECK(c.sweep_lambdas.size() == kPaperLambdas.size());
    CHECK(c.overridden.empty());
}

TEST_CASE("flags override the file", "[config]") {
    const Pairs file{{"lambda", "0.1"}, {"depth", "20"}};
    const Pairs flags{{"lambda", "0.3"}, {"t_max", "50"}};
    const auto c = resolve_config(file, flags);
    CHECK(c.lambda == 0.3);
    CHECK(c.depth == 20);
    CHECK(c.t_max == 50.0);
    REQUIRE(c.overridden.size() == 1);
    CHECK(c.overridden[0] == "lambda");
}

TEST_CASE("bad values name the field", "[config]") {
    CHECK_THROWS_WITH(resolve_config({{"temperature", "-1"}}, {}), ContainsSubstring("temperature"));
    CHECK_THROWS_WITH(resolve_config({{"lambda", "abc"}}, {}), ContainsSubstring("lambda"));
    CHECK_THROWS_WITH(resolve_config({{"depth", "2.5"}}, {}), ContainsSubstring("depth"));
    CHECK_THROWS_WITH(resolve_config({{"coupling", "0,0,0"}}, {}), ContainsSubstring("coupling"));
    CHECK_THROWS_WITH(resolve_config({{"sweep.case", "III"}}, {}), ContainsSubstring("sweep.case"));
    CHECK_THROWS_WITH(resolve_config({{"sweep.lambdas", "1,0.5"}}, {}), ContainsSubstring("increasing"));
    CHECK_THROWS_WITH(resolve_config({{"steady_window", "0.01"}}, {}), ContainsSubstring("steady_window"));

    RunConfig c;
    CHECK_THROWS_WITH(set_key(c, "lamda", "1"), ContainsSubstring("valid keys") && ContainsSubstring("lambda"));
}

TEST_CASE("named values", "[config]") {
    CHECK(resolve_config({{"coupling", "sxsz"}}, {}).coupling == Eigen::Vector3d(0.5, 0.0, 0.5));
    CHECK(resolve_config({{"coupling", "0.1, 0.2, 0.3"}}, {}).coupling == Eigen::Vector3d(0.1, 0.2, 0.3));
    CHECK(resolve_config({{"dt", "auto"}}, {}).dt == 0.0);
    CHECK(resolve_config({{"dt", "0.002"}}, {}).dt == 0.002);
    CHECK(case_coupling("I") == Eigen::Vector3d(1.0, 0.0, 0.0));
    CHECK_THROWS_AS(case_coupling("x"), ConfigError);

    RunConfig c;
    CHECK((bloch_from_density(initial_state(c)) - BlochVector(std::sqrt(0.5), 0.0, std::sqrt(0.5))).norm() < 1e-15);
    c.initial_state = "gibbs";
    CHECK(bloch_from_density(initial_state(c)).z() == Approx(-std::tanh(1.0 / 3.0)).epsilon(1e-14));
    c.initial_state = "0,0.6,0.8";
    CHECK(bloch_from_density(initial_state(c)).y() == Approx(0.6));
    c.initial_state = "0,1,1";
    CHECK_THROWS_AS(initial_state(c), ConfigError);
    c.initial_state = "up";
    CHECK_THROWS_AS(initial_state(c), ConfigError);

    CHECK(flag_name("coupling.ax") == "coupling-ax");
    CHECK(flag_name("t_max") == "t-max");
    for (const auto& k : config_keys()) CHECK(flag_name(k).find_first_of("._") == std::string::npos);
}

TEST_CASE("engine settings follow the config", "[config]") {
    const auto c = resolve_config({{"depth", "7"}, {"gamma_drude", "2"}, {"steady_tol", "1e-5"}}, {});
    const auto e = engine_config(c);
    CHECK(e.depth == 7);
    CHECK(e.gamma == 2.0);
    CHECK(e.integrator.steady_tol == 1e-5);
    CHECK(e.integrator.t_max == c.t_max);
}
