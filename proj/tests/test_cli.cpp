#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// Drives the real binary end to end through std::system; no library shortcuts.

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char buf[] = "/tmp/arvae_cli_XXXXXX";
        REQUIRE(mkdtemp(buf) != nullptr);
        path = buf;
    }
    std::string file(const std::string& name) const { return path + "/" + name; }
};

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const TempDir& dir, const std::string& args) {
    const std::string out_file = dir.file("stdout.txt");
    const std::string err_file = dir.file("stderr.txt");
    const std::string cmd = std::string(ARVAE_CLI_PATH) + " " + args + " >" + out_file +
                            " 2>" + err_file;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

// small-but-real training flags so each invocation stays fast
const std::string kTinyData =
    "--data synth --synth-count 64 --synth-test-count 16 --synth-side 8 --synth-rho 0.8 "
    "--d 4 --hidden 8 --batch 16";

// strips the wall-clock column, the one legitimately varying field
std::string drop_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        const std::size_t cut = line.rfind(',');
        out += line.substr(0, cut) + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("train with zero epochs writes the full artifact set") {
    TempDir dir;
    const RunResult r =
        run_cli(dir, "train " + kTinyData + " --epochs 0 --seed 3 --out " + dir.file("run"));
    CHECK(r.code == 0);
    CHECK(file_exists(dir.file("run/model.ckpt")));
    CHECK(file_exists(dir.file("run/run_manifest.json")));
    CHECK(slurp(dir.file("run/stats.csv")) ==
          "epoch,train_loss,test_loss,test_recon,test_kl,seconds\n");
    const std::string manifest = slurp(dir.file("run/run_manifest.json"));
    CHECK(manifest.find("config_hash") != std::string::npos);
    CHECK(manifest.find("\"seed\": 3") != std::string::npos);
}

TEST_CASE("flag validation fails fast with exit code 1") {
    TempDir dir;
    RunResult r = run_cli(dir, "train " + kTinyData + " --epochs 1 --beta -1 --out " +
                                   dir.file("x"));
    CHECK(r.code == 1);
    CHECK(r.err.find("--beta") != std::string::npos);

    r = run_cli(dir, "train " + kTinyData + " --epochs 1 --no-such-flag --out " + dir.file("x"));
    CHECK(r.code == 1);

    r = run_cli(dir, "train " + kTinyData + " --epochs 1 --synth-rho 1.5 --out " + dir.file("x"));
    CHECK(r.code == 1);
    CHECK(r.err.find("synth-rho") != std::string::npos);

    // file-backed data demands an explicit test split
    r = run_cli(dir, "train --data /nonexistent.idx --epochs 1 --out " + dir.file("x"));
    CHECK(r.code == 1);
    CHECK(r.err.find("test-data") != std::string::npos);
}

TEST_CASE("missing input files exit with the i/o code") {
    TempDir dir;
    RunResult r = run_cli(dir, "train --data /nonexistent.idx --test-data /missing.idx "
                               "--epochs 1 --out " +
                                   dir.file("x"));
    CHECK(r.code == 3);
    CHECK(r.err.find("cannot open") != std::string::npos);

    r = run_cli(dir, "sample --checkpoint /nonexistent.ckpt --count 1 --out " +
                         dir.file("s.pgm"));
    CHECK(r.code == 3);
}

TEST_CASE("repeated training runs are reproducible artifact for artifact") {
    TempDir dir;
    const std::string flags = "train --posterior ar1 " + kTinyData + " --epochs 2 --seed 7";
    const RunResult a = run_cli(dir, flags + " --out " + dir.file("a"));
    const RunResult b = run_cli(dir, flags + " --out " + dir.file("b"));
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);

    const std::string csv_a = slurp(dir.file("a/stats.csv"));
    const std::string csv_b = slurp(dir.file("b/stats.csv"));
    CHECK(drop_last_column(csv_a) == drop_last_column(csv_b));
    CHECK(csv_a.rfind("epoch,train_loss,test_loss,test_recon,test_kl,seconds\n", 0) == 0);

    const std::string ck_a = slurp(dir.file("a/model.ckpt"));
    const std::string ck_b = slurp(dir.file("b/model.ckpt"));
    CHECK(!ck_a.empty());
    CHECK(ck_a == ck_b);

    // a different seed must actually change the outcome
    const RunResult c = run_cli(dir, "train --posterior ar1 " + kTinyData +
                                         " --epochs 2 --seed 8 --out " + dir.file("c"));
    REQUIRE(c.code == 0);
    CHECK(slurp(dir.file("c/model.ckpt")) != ck_a);
}

TEST_CASE("compare emits the paired per-epoch table, byte-stable across reruns") {
    TempDir dir;
    const std::string flags = "compare " + kTinyData + " --epochs 2 --seed 5";
    const RunResult a = run_cli(dir, flags + " --out " + dir.file("a"));
    REQUIRE(a.code == 0);
    CHECK(a.out.find("final test loss") != std::string::npos);

    const std::string csv = slurp(dir.file("a/compare.csv"));
    CHECK(csv.rfind("epoch,diag_test_loss,ar1_test_loss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\n1,") != std::string::npos);
    CHECK(csv.find("\n2,") != std::string::npos);
    CHECK(file_exists(dir.file("a/diag_stats.csv")));
    CHECK(file_exists(dir.file("a/ar1_stats.csv")));

    const RunResult b = run_cli(dir, flags + " --out " + dir.file("b"));
    REQUIRE(b.code == 0);
    CHECK(slurp(dir.file("b/compare.csv")) == csv);
}

TEST_CASE("sample renders a PGM grid from a trained checkpoint") {
    TempDir dir;
    REQUIRE(run_cli(dir, "train " + kTinyData + " --epochs 1 --seed 2 --out " + dir.file("run"))
                .code == 0);
    const std::string ckpt = dir.file("run/model.ckpt");

    const RunResult one = run_cli(dir, "sample --checkpoint " + ckpt +
                                           " --count 1 --seed 9 --out " + dir.file("one.pgm"));
    REQUIRE(one.code == 0);
    const std::string pgm1 = slurp(dir.file("one.pgm"));
    CHECK(pgm1.rfind("P5\n8 8\n255\n", 0) == 0);
    CHECK(pgm1.size() == 11 + 64);

    // 64 tiles of 8x8 pack into a square 64x64 grid
    const RunResult grid = run_cli(dir, "sample --checkpoint " + ckpt +
                                            " --count 64 --seed 9 --out " + dir.file("grid.pgm"));
    REQUIRE(grid.code == 0);
    const std::string pgm64 = slurp(dir.file("grid.pgm"));
    CHECK(pgm64.rfind("P5\n64 64\n255\n", 0) == 0);
    CHECK(pgm64.size() == 13 + 4096);

    const RunResult again = run_cli(dir, "sample --checkpoint " + ckpt +
                                             " --count 64 --seed 9 --out " + dir.file("g2.pgm"));
    REQUIRE(again.code == 0);
    CHECK(slurp(dir.file("g2.pgm")) == pgm64);

    const RunResult other = run_cli(dir, "sample --checkpoint " + ckpt +
                                             " --count 64 --seed 10 --out " + dir.file("g3.pgm"));
    REQUIRE(other.code == 0);
    CHECK(slurp(dir.file("g3.pgm")) != pgm64);
}

TEST_CASE("check subcommand prints the table and exits zero") {
    TempDir dir;
    const RunResult r = run_cli(dir, "check");
    CHECK(r.code == 0);
    CHECK(r.out.find("kl_ar1") != std::string::npos);
    CHECK(r.out.find("vae_loss_grad") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
