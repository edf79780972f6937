#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "frachaos/config.hpp"

using namespace frachaos;
namespace fs = std::filesystem;

namespace {

const std::string kBase =
    "hurst = 0.25\nhorizon = 1.0\nn_cells = 64\n"
    "b_spec.kind = constant\nb_spec.data = 0.8\n"
    "eta_spec.kind = deterministic\neta_spec.data = 1.0\n";

SolverConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Run {
    int code;
    std::string output;
};

Run run_cli(const std::string& args) {
    const std::string cmd = std::string(FRACHAOS_CLI) + " " + args + " 2>&1";
    Run r{-1, ""};
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

/// Scratch directory removed on scope exit.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("frachaos_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string config(const std::string& text) const {
        const auto p = path / "run.conf";
        std::ofstream(p) << text;
        return p.string();
    }
};

std::string config_file(const char* name) { return std::string(FRACHAOS_CONFIGS) + "/" + name; }

}  // namespace

// ---- config parsing

TEST(Config, Defaults) {
    const auto c = parse(kBase);
    EXPECT_EQ(c.n_max, 12);
    EXPECT_EQ(c.seed, 0u);
    EXPECT_EQ(c.a_kind, "constant");
    EXPECT_DOUBLE_EQ(c.p, 0.5 * (2.0 + 4.0));
    EXPECT_DOUBLE_EQ(c.p_tilde, 0.5 * (2.0 + c.p));
    EXPECT_TRUE(std::isfinite(c.theta));
    EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, CommentsAndWhitespace) {
    const auto c = parse("# header\n\n" + kBase + "  seed   =  9   # trailing\n");
    EXPECT_EQ(c.seed, 9u);
}

TEST(Config, ErrorsCarryLineNumbers) {
    EXPECT_NE(parse_error(kBase + "bogus = 1\n").find("line 8"), std::string::npos);
    EXPECT_NE(parse_error(kBase + "bogus = 1\n").find("bogus"), std::string::npos);
    EXPECT_NE(parse_error("hurst = 0.2\nhurst = 0.3\n").find("line 2"), std::string::npos);
    EXPECT_NE(parse_error("hurst = 0.2\nhurst 0.3\n").find("line 2"), std::string::npos);
}

TEST(Config, RangeErrorsNameTheField) {
    std::string text = kBase;
    text.replace(text.find("0.25"), 4, "0.6");
    EXPECT_EQ(parse_error(text), "hurst must be < 0.5");
    EXPECT_NE(parse_error(kBase + "n_max = -1\n").find("n_max"), std::string::npos);
    EXPECT_NE(parse_error(kBase + "p = 5\n").find("p must be < 1/alpha"), std::string::npos);

    const auto msg = parse_error(kBase + "p = 3\np_tilde = 3.5\n");
    EXPECT_NE(msg.find("p_tilde"), std::string::npos);
    EXPECT_NE(msg.find("p = 3"), std::string::npos);
}

TEST(Config, MissingRequiredKey) {
    EXPECT_NE(parse_error("hurst = 0.25\n").find("horizon"), std::string::npos);
}

// ---- command line

TEST(Cli, ExitCodes) {
    TempDir d("codes");
    EXPECT_EQ(run_cli("check --config " + config_file("wick.conf") + " --out " + (d.path / "w").string()).code, 0);
    const auto crit = run_cli("check --config " + config_file("critical.conf") + " --out " + (d.path / "c").string());
    EXPECT_EQ(crit.code, 2) << crit.output;
    EXPECT_EQ(slurp(d.path / "c" / "condition_report.txt").rfind("verdict = fail\n", 0), 0u);

    const auto bad = run_cli("check --config " + d.config(kBase + "hurst_typo = 1\n"));
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("line 8"), std::string::npos) << bad.output;
    EXPECT_EQ(run_cli("check --config /nonexistent/file.conf").code, 1);
    EXPECT_EQ(run_cli("frobnicate --config x").code, 1);
    EXPECT_EQ(run_cli("check").code, 1);
}

TEST(Cli, SimulateIsDeterministic) {
    TempDir d("det");
    const auto cfg = d.config(kBase + "n_paths = 100\n");
    const auto a = d.path / "a", b = d.path / "b", c = d.path / "c";
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 5 --out " + a.string()).code, 0);
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 5 --out " + b.string()).code, 0);
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 6 --out " + c.string()).code, 0);
    const auto pa = slurp(a / "paths.csv");
    EXPECT_FALSE(pa.empty());
    EXPECT_EQ(pa, slurp(b / "paths.csv"));
    EXPECT_NE(pa, slurp(c / "paths.csv"));
}

TEST(Cli, ManifestDescribesRun) {
    TempDir d("manifest");
    const auto cfg = d.config(kBase + "n_paths = 100\n");
    const auto out = d.path / "m";
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 42 --out " + out.string()).code, 0);
    const auto m = slurp(out / "manifest.txt");
    EXPECT_NE(m.find("command = simulate\n"), std::string::npos) << m;
    EXPECT_NE(m.find("seed = 42\n"), std::string::npos) << m;
    EXPECT_NE(m.find("exit_code = 0\n"), std::string::npos) << m;
    EXPECT_NE(m.find("rows.paths.csv = "), std::string::npos) << m;
    EXPECT_NE(m.find("[config]"), std::string::npos) << m;
    for (const auto& e : fs::directory_iterator(out)) EXPECT_FALSE(e.path().extension() == ".tmp") << e.path();
}

TEST(Cli, MomentsWithoutDiffusion) {
    // b = 0, a = 0.5, η = 1 makes X_t = e^{t/2} exactly.
    TempDir d("moments");
    std::string text = kBase + "a_spec.coefficients = 0.5\n";
    text.replace(text.find("b_spec.data = 0.8"), 17, "b_spec.data = 0.0");
    const auto out = d.path / "m";
    ASSERT_EQ(run_cli("moments --config " + d.config(text) + " --out " + out.string()).code, 0);
    std::istringstream csv(slurp(out / "moments.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "t,mean,second_moment,tail_flag");
    int rows = 0;
    while (std::getline(csv, line)) {
        double t, m, m2;
        int flag;
        char sep;
        std::istringstream row(line);
        row >> t >> sep >> m >> sep >> m2 >> sep >> flag;
        EXPECT_NEAR(m, std::exp(0.5 * t), 1e-12 * std::exp(0.5 * t)) << line;
        EXPECT_NEAR(m2, std::exp(t), 1e-12 * std::exp(t)) << line;
        EXPECT_EQ(flag, 0);
        ++rows;
    }
    EXPECT_GT(rows, 1);
}
