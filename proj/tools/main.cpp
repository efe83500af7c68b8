#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "arvae/data_io.hpp"
#include "arvae/nets.hpp"
#include "arvae/rng.hpp"
#include "arvae/selfcheck.hpp"
#include "arvae/trainer.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// stream tags hung off --seed; every random draw in every subcommand is
// reachable from that one flag
constexpr std::uint64_t kSynthTrainStream = 0x73797472;
constexpr std::uint64_t kSynthTestStream = 0x73797465;
constexpr std::uint64_t kSampleStream = 0x73616d70;

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct DataOpts {
    std::string data = "synth";
    std::string test_data;
    int synth_count = 4000;
    int synth_test_count = 1000;
    int synth_side = 8;
    double synth_rho = 0.8;
};

struct RunArgs {
    arvae::TrainConfig cfg;
    std::string posterior = "diag";
    std::string loss = "bernoulli";
    DataOpts data;
    std::string out;
};

void add_training_flags(CLI::App* cmd, RunArgs& a, bool with_posterior) {
    if (with_posterior)
        cmd->add_option("--posterior", a.posterior, "posterior family")
            ->check(CLI::IsMember({"diag", "ar1"}))
            ->capture_default_str();
    cmd->add_option("--data", a.data.data,
                    "IDX image file, or 'synth' for the builtin correlated generator")
        ->capture_default_str();
    cmd->add_option("--test-data", a.data.test_data,
                    "IDX image file for the test split (required with file data)");
    cmd->add_option("--d", a.cfg.latent_dim, "latent dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--hidden", a.cfg.hidden_dim, "hidden layer width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--beta", a.cfg.beta, "KL term weight")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--epochs", a.cfg.epochs, "training epochs")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--batch", a.cfg.batch_size, "mini-batch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--lr", a.cfg.lr, "learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", a.cfg.seed, "master seed for every random stream")
        ->capture_default_str();
    cmd->add_option("--loss", a.loss, "reconstruction loss")
        ->check(CLI::IsMember({"bernoulli", "gaussian"}))
        ->capture_default_str();
    cmd->add_option("--out", a.out, "output directory")->required();
    cmd->add_option("--synth-count", a.data.synth_count, "synthetic train images")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--synth-test-count", a.data.synth_test_count, "synthetic test images")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--synth-side", a.data.synth_side, "synthetic image side length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--synth-rho", a.data.synth_rho, "synthetic pixel correlation, in (-1, 1)")
        ->capture_default_str();
}

void resolve_enums(RunArgs& a) {
    a.cfg.posterior_kind =
        a.posterior == "ar1" ? arvae::PosteriorKind::ar1 : arvae::PosteriorKind::diag;
    a.cfg.recon_loss =
        a.loss == "gaussian" ? arvae::ReconLoss::gaussian : arvae::ReconLoss::bernoulli;
}

std::pair<arvae::Dataset, arvae::Dataset> load_data(const DataOpts& d, std::uint64_t seed) {
    if (d.data == "synth") {
        if (!(std::abs(d.synth_rho) < 1.0))
            throw std::invalid_argument("--synth-rho must lie in (-1, 1)");
        arvae::Dataset tr =
            arvae::synth_correlated(d.synth_count, d.synth_side, d.synth_rho,
                                    arvae::mix_seed(seed, kSynthTrainStream),
                                    arvae::Split::train);
        arvae::Dataset te =
            arvae::synth_correlated(d.synth_test_count, d.synth_side, d.synth_rho,
                                    arvae::mix_seed(seed, kSynthTestStream),
                                    arvae::Split::test);
        return {std::move(tr), std::move(te)};
    }
    if (d.data.empty())
        throw std::invalid_argument("--data must name an IDX file or 'synth'");
    if (d.test_data.empty())
        throw std::invalid_argument("--test-data is required when --data is a file path");
    return {arvae::read_idx_file(d.data, arvae::Split::train),
            arvae::read_idx_file(d.test_data, arvae::Split::test)};
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

json config_echo(const arvae::TrainConfig& cfg, const DataOpts& d) {
    json j = json::parse(cfg.to_json());
    j["data"] = d.data;
    if (d.data == "synth") {
        j["synth"] = {{"count", d.synth_count},
                      {"test_count", d.synth_test_count},
                      {"side", d.synth_side},
                      {"rho", d.synth_rho}};
    } else {
        j["test_data"] = d.test_data;
    }
    return j;
}

// manifest lands on disk before any training step runs
void write_manifest(const fs::path& path, const json& cfg_echo, const json& outputs) {
    json manifest;
    manifest["config"] = cfg_echo;
    manifest["config_hash"] = hex64(fnv1a64(cfg_echo.dump()));
    manifest["outputs"] = outputs;
    write_text(path, manifest.dump(2) + "\n");
}

int run_train(RunArgs& a) {
    resolve_enums(a);
    a.cfg.validate();
    const auto [tr, te] = load_data(a.data, a.cfg.seed);
    const fs::path out(a.out);
    fs::create_directories(out);
    const json cfgj = config_echo(a.cfg, a.data);
    write_manifest(out / "run_manifest.json", cfgj,
                   {{"manifest", (out / "run_manifest.json").string()},
                    {"csv", (out / "stats.csv").string()},
                    {"checkpoint", (out / "model.ckpt").string()}});
    const arvae::TrainResult res = arvae::train(tr, te, a.cfg);
    write_text(out / "stats.csv", res.csv);
    json meta;
    meta["config"] = cfgj;
    meta["rows"] = tr.rows;
    meta["cols"] = tr.cols;
    arvae::save_checkpoint((out / "model.ckpt").string(), res.model, meta.dump());
    if (res.stats.empty()) {
        std::cout << "no epochs requested; wrote checkpoint of the initial weights\n";
    } else {
        const arvae::EpochStats& st = res.stats.back();
        std::printf("epoch %d  train %.6f  test %.6f  (recon %.6f, kl %.6f)\n", st.epoch,
                    st.train_loss, st.test_loss, st.test_recon, st.test_kl);
    }
    return 0;
}

int run_compare(RunArgs& a) {
    resolve_enums(a);
    a.cfg.validate();
    const auto [tr, te] = load_data(a.data, a.cfg.seed);
    const fs::path out(a.out);
    fs::create_directories(out);
    json cfgj = config_echo(a.cfg, a.data);
    cfgj.erase("posterior");
    write_manifest(out / "run_manifest.json", cfgj,
                   {{"manifest", (out / "run_manifest.json").string()},
                    {"csv", (out / "compare.csv").string()},
                    {"diag_csv", (out / "diag_stats.csv").string()},
                    {"ar1_csv", (out / "ar1_stats.csv").string()}});
    a.cfg.posterior_kind = arvae::PosteriorKind::diag;
    const arvae::TrainResult diag = arvae::train(tr, te, a.cfg);
    a.cfg.posterior_kind = arvae::PosteriorKind::ar1;
    const arvae::TrainResult ar1 = arvae::train(tr, te, a.cfg);

    std::string csv = "epoch,diag_test_loss,ar1_test_loss\n";
    char buf[128];
    for (std::size_t i = 0; i < diag.stats.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", diag.stats[i].epoch,
                      diag.stats[i].test_loss, ar1.stats[i].test_loss);
        csv += buf;
    }
    write_text(out / "compare.csv", csv);
    write_text(out / "diag_stats.csv", diag.csv);
    write_text(out / "ar1_stats.csv", ar1.csv);
    if (diag.stats.empty()) {
        std::cout << "no epochs requested; empty comparison\n";
    } else {
        const double dl = diag.stats.back().test_loss;
        const double al = ar1.stats.back().test_loss;
        std::printf("final test loss: diag %.12g  ar1 %.12g  (ar1 - diag = %.12g)\n", dl, al,
                    al - dl);
    }
    return 0;
}

void write_pgm(const fs::path& path, const std::vector<std::vector<double>>& images, int rows,
               int cols) {
    const int count = static_cast<int>(images.size());
    const int gcols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    const int grows = (count + gcols - 1) / gcols;
    const int width = gcols * cols;
    const int height = grows * rows;
    std::vector<unsigned char> px(static_cast<std::size_t>(width) * height, 0);
    for (int i = 0; i < count; ++i) {
        const int tr = i / gcols;
        const int tc = i % gcols;
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < cols; ++x) {
                const double v = std::clamp(images[i][static_cast<std::size_t>(y) * cols + x],
                                            0.0, 1.0);
                px[static_cast<std::size_t>(tr * rows + y) * width + (tc * cols + x)] =
                    static_cast<unsigned char>(std::lround(255.0 * v));
            }
    }
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw std::runtime_error("cannot open " + path.string() + " for writing");
    outf << "P5\n" << width << " " << height << "\n255\n";
    outf.write(reinterpret_cast<const char*>(px.data()),
               static_cast<std::streamsize>(px.size()));
    if (!outf) throw std::runtime_error("write failed: " + path.string());
}

int run_sample(const std::string& ckpt_path, int count, std::uint64_t seed,
               const std::string& out_path) {
    const arvae::Checkpoint ck = arvae::load_checkpoint(ckpt_path);
    int rows = 0, cols = 0;
    try {
        const json meta = json::parse(ck.meta_json);
        rows = meta.value("rows", 0);
        cols = meta.value("cols", 0);
    } catch (const json::exception&) {
    }
    if (rows < 1 || cols < 1 || rows * cols != ck.model.input_dim) {
        const int side =
            static_cast<int>(std::lround(std::sqrt(static_cast<double>(ck.model.input_dim))));
        if (side * side == ck.model.input_dim) {
            rows = cols = side;
        } else {
            rows = 1;
            cols = ck.model.input_dim;
        }
    }
    json cfgj = {{"checkpoint", ckpt_path}, {"count", count}, {"seed", seed}};
    write_manifest(out_path + ".manifest.json", cfgj, {{"image", out_path}});
    arvae::NormalRng rng(arvae::mix_seed(seed, kSampleStream));
    const auto images = arvae::generate(ck.model, count, rng);
    write_pgm(out_path, images, rows, cols);
    std::printf("wrote %s: %d tiles of %dx%d\n", out_path.c_str(), count, rows, cols);
    return 0;
}

int run_check() {
    const auto results = arvae::run_self_checks();
    std::cout << arvae::format_check_table(results);
    if (arvae::all_passed(results)) return 0;
    std::string failed;
    for (const auto& r : results)
        if (!r.passed) failed += " " + r.name;
    std::cerr << "failed checks:" << failed << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AR(1)-correlated Gaussian posterior VAE: train, compare, sample, check"};
    app.require_subcommand(1);

    RunArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train one posterior variant");
    add_training_flags(train_cmd, train_args, true);

    RunArgs compare_args;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "paired diag vs ar1 run on identical data and seed");
    add_training_flags(compare_cmd, compare_args, false);

    std::string ckpt_path, sample_out;
    int sample_count = 64;
    std::uint64_t sample_seed = 1;
    CLI::App* sample_cmd = app.add_subcommand("sample", "decode prior draws into a PGM grid");
    sample_cmd->add_option("--checkpoint", ckpt_path, "trained model checkpoint")->required();
    sample_cmd->add_option("--count", sample_count, "number of tiles")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sample_cmd->add_option("--seed", sample_seed, "sampling seed")->capture_default_str();
    sample_cmd->add_option("--out", sample_out, "output PGM path")->required();

    CLI::App* check_cmd =
        app.add_subcommand("check", "run the invariant and gradient self-checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train_cmd) return run_train(train_args);
        if (*compare_cmd) return run_compare(compare_args);
        if (*sample_cmd) return run_sample(ckpt_path, sample_count, sample_seed, sample_out);
        if (*check_cmd) return run_check();
    } catch (const arvae::TrainAbort& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
