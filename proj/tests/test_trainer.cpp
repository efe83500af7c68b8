#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "arvae/data_io.hpp"
#include "arvae/oracle.hpp"
#include "arvae/rng.hpp"
#include "arvae/trainer.hpp"

using namespace arvae;

namespace {

std::vector<double> pack_params(VaeModel& m) {
    std::vector<double> flat;
    for (const NamedParam& p : param_views(m)) flat.insert(flat.end(), p.data.begin(), p.data.end());
    return flat;
}

}  // namespace

TEST_CASE("validate names the offending field") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;  // zero epochs is a legal no-op run
    CHECK_NOTHROW(cfg.validate());

    auto expect_mention = [](TrainConfig bad, const char* word) {
        try {
            bad.validate();
            const std::string note = std::string("expected invalid_argument for ") + word;
            FAIL(note);
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find(word) != std::string::npos);
        }
    };
    TrainConfig c;
    c.beta = -1.0;
    expect_mention(c, "beta");
    c = TrainConfig{};
    c.beta = std::nan("");
    expect_mention(c, "beta");
    c = TrainConfig{};
    c.latent_dim = 0;
    expect_mention(c, "d");
    c = TrainConfig{};
    c.hidden_dim = -3;
    expect_mention(c, "hidden");
    c = TrainConfig{};
    c.epochs = -1;
    expect_mention(c, "epochs");
    c = TrainConfig{};
    c.batch_size = 0;
    expect_mention(c, "batch");
    c = TrainConfig{};
    c.lr = 0.0;
    expect_mention(c, "lr");
}

TEST_CASE("output activation follows the reconstruction loss") {
    TrainConfig cfg;
    cfg.recon_loss = ReconLoss::bernoulli;
    CHECK(cfg.output_activation() == Activation::sigmoid);
    cfg.recon_loss = ReconLoss::gaussian;
    CHECK(cfg.output_activation() == Activation::identity);
}

TEST_CASE("config echo is a stable fingerprint") {
    TrainConfig a, b;
    CHECK(a.to_json() == b.to_json());
    b.beta = 2.0;
    CHECK(a.to_json() != b.to_json());

    // Paired runs differ only in the posterior field of the echo.
    TrainConfig diag, ar1;
    ar1.posterior_kind = PosteriorKind::ar1;
    nlohmann::json jd = nlohmann::json::parse(diag.to_json());
    nlohmann::json ja = nlohmann::json::parse(ar1.to_json());
    CHECK(jd["posterior"] == "diag");
    CHECK(ja["posterior"] == "ar1");
    jd.erase("posterior");
    ja.erase("posterior");
    CHECK(jd == ja);
}

TEST_CASE("elbo_loss pinned values") {
    TrainConfig cfg;
    cfg.recon_loss = ReconLoss::bernoulli;
    cfg.beta = 1.0;

    const std::vector<double> one = {1.0}, half = {0.5};
    LossParts lp = elbo_loss(one, half, 0.0, cfg);
    CHECK(lp.recon == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lp.total == lp.recon);

    // A perfect hit only pays the probability clamp, which is ~1e-7 nats.
    const std::vector<double> zero = {0.0};
    CHECK(elbo_loss(one, one, 0.0, cfg).recon < 1e-6);
    CHECK(elbo_loss(zero, zero, 0.0, cfg).recon < 1e-6);

    cfg.beta = 2.5;
    lp = elbo_loss(one, half, 0.7, cfg);
    CHECK(lp.total == doctest::Approx(lp.recon + 2.5 * 0.7).epsilon(1e-12));

    cfg.recon_loss = ReconLoss::gaussian;
    CHECK(elbo_loss(half, half, 0.0, cfg).recon == 0.0);
    const std::vector<double> xh = {0.25};
    CHECK(elbo_loss(half, xh, 0.0, cfg).recon == doctest::Approx(0.5 * 0.25 * 0.25));

    const std::vector<double> bad = {1.5};
    CHECK_THROWS_AS(elbo_loss(bad, half, 0.0, cfg), std::invalid_argument);
    const std::vector<double> two = {0.1, 0.2};
    CHECK_THROWS_AS(elbo_loss(two, half, 0.0, cfg), std::invalid_argument);
}

TEST_CASE("batch_eval gradients match finite differences for every variant") {
    const struct {
        PosteriorKind kind;
        ReconLoss loss;
        std::uint64_t seed;
    } settings[] = {{PosteriorKind::diag, ReconLoss::bernoulli, 11},
                    {PosteriorKind::ar1, ReconLoss::bernoulli, 12},
                    {PosteriorKind::ar1, ReconLoss::gaussian, 13}};
    constexpr int n = 16, hidden = 8, d = 4, batch = 2;

    for (const auto& s : settings) {
        CAPTURE(static_cast<int>(s.kind));
        CAPTURE(static_cast<int>(s.loss));
        TrainConfig cfg;
        cfg.posterior_kind = s.kind;
        cfg.recon_loss = s.loss;
        cfg.beta = 0.7;
        cfg.latent_dim = d;
        cfg.hidden_dim = hidden;

        VaeModel model = make_vae(n, hidden, d, s.kind, cfg.output_activation(),
                                  mix_seed(900, s.seed));
        NormalRng rng(mix_seed(901, s.seed));
        std::vector<double> x(batch * n), eps(batch * d);
        for (double& v : x) v = rng.uniform();
        rng.fill_normal(eps);

        VaeGrads grads = make_grads(model);
        batch_eval(model, x, batch, eps, cfg, &grads);
        std::vector<double> analytic;
        for (const auto& g : grad_views(model, grads))
            analytic.insert(analytic.end(), g.data.begin(), g.data.end());
        const std::vector<double> p0 = pack_params(model);

        VaeModel scratch = model;
        auto views = param_views(scratch);
        auto loss_at = [&](std::span<const double> q) {
            std::size_t off = 0;
            for (auto& p : views) {
                std::copy(q.begin() + off, q.begin() + off + p.data.size(), p.data.begin());
                off += p.data.size();
            }
            return batch_eval(scratch, x, batch, eps, cfg, nullptr).loss_sum;
        };
        const oracle::GradCheckReport rep = oracle::finite_diff(loss_at, p0, analytic, 1e-5, 1e-4);
        CAPTURE(rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("batch_eval rejects shape mismatches") {
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.hidden_dim = 4;
    VaeModel m = make_vae(6, 4, 2, PosteriorKind::diag, Activation::sigmoid, 1);
    std::vector<double> x(6, 0.5), eps(2, 0.0);
    CHECK_NOTHROW(batch_eval(m, x, 1, eps, cfg, nullptr));
    CHECK_THROWS_AS(batch_eval(m, x, 2, eps, cfg, nullptr), std::invalid_argument);
    std::vector<double> short_eps(1, 0.0);
    CHECK_THROWS_AS(batch_eval(m, x, 1, short_eps, cfg, nullptr), std::invalid_argument);
}

TEST_CASE("zero epochs trains nothing and logs only the header") {
    const Dataset tr = synth_correlated(8, 4, 0.5, 21, Split::train);
    const Dataset te = synth_correlated(4, 4, 0.5, 22, Split::test);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.latent_dim = 2;
    cfg.hidden_dim = 4;
    cfg.batch_size = 4;
    const TrainResult res = train(tr, te, cfg);
    CHECK(res.stats.empty());
    CHECK(res.csv == "epoch,train_loss,test_loss,test_recon,test_kl,seconds\n");
    // The untrained model still comes back usable.
    CHECK(res.model.input_dim == 16);
    CHECK(res.model.latent_dim == 2);
}

TEST_CASE("training reduces the loss on a memorizable set") {
    const Dataset tr = synth_correlated(16, 4, 0.6, 31, Split::train);
    TrainConfig cfg;
    cfg.posterior_kind = PosteriorKind::ar1;
    cfg.recon_loss = ReconLoss::gaussian;
    cfg.epochs = 40;
    cfg.latent_dim = 2;
    cfg.hidden_dim = 8;
    cfg.batch_size = 8;
    cfg.lr = 3e-3;
    cfg.seed = 5;
    const TrainResult res = train(tr, tr, cfg);
    REQUIRE(res.stats.size() == 40);
    CHECK(res.stats.back().test_recon < res.stats.front().test_recon);
    for (const EpochStats& st : res.stats) {
        CHECK(std::isfinite(st.train_loss));
        CHECK(st.test_kl >= 0.0);
    }
}

TEST_CASE("per-epoch identity: test_loss = test_recon + beta * test_kl") {
    const Dataset tr = synth_correlated(12, 4, 0.7, 41, Split::train);
    const Dataset te = synth_correlated(6, 4, 0.7, 42, Split::test);
    for (PosteriorKind kind : {PosteriorKind::diag, PosteriorKind::ar1}) {
        TrainConfig cfg;
        cfg.posterior_kind = kind;
        cfg.beta = 1.7;
        cfg.epochs = 3;
        cfg.latent_dim = 3;
        cfg.hidden_dim = 6;
        cfg.batch_size = 4;
        const TrainResult res = train(tr, te, cfg);
        for (const EpochStats& st : res.stats)
            CHECK(st.test_loss ==
                  doctest::Approx(st.test_recon + cfg.beta * st.test_kl).epsilon(1e-9));
    }
}

TEST_CASE("identical configs reproduce stats and final weights exactly") {
    const Dataset tr = synth_correlated(16, 4, 0.8, 51, Split::train);
    const Dataset te = synth_correlated(8, 4, 0.8, 52, Split::test);
    TrainConfig cfg;
    cfg.posterior_kind = PosteriorKind::ar1;
    cfg.epochs = 3;
    cfg.latent_dim = 3;
    cfg.hidden_dim = 6;
    cfg.batch_size = 4;
    cfg.seed = 77;
    TrainResult a = train(tr, te, cfg);
    TrainResult b = train(tr, te, cfg);
    REQUIRE(a.stats.size() == b.stats.size());
    for (std::size_t i = 0; i < a.stats.size(); ++i) {
        // Everything except the wall-clock column must be bit-identical.
        CHECK(a.stats[i].epoch == b.stats[i].epoch);
        CHECK(a.stats[i].train_loss == b.stats[i].train_loss);
        CHECK(a.stats[i].test_loss == b.stats[i].test_loss);
        CHECK(a.stats[i].test_recon == b.stats[i].test_recon);
        CHECK(a.stats[i].test_kl == b.stats[i].test_kl);
    }
    CHECK(pack_params(a.model) == pack_params(b.model));

    TrainConfig other = cfg;
    other.seed = 78;
    TrainResult c = train(tr, te, other);
    CHECK(pack_params(c.model) != pack_params(a.model));
}

TEST_CASE("divergence aborts with a located non-finite report") {
    const Dataset tr = synth_correlated(32, 4, 0.5, 61, Split::train);
    const Dataset te = synth_correlated(8, 4, 0.5, 62, Split::test);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.latent_dim = 8;
    cfg.hidden_dim = 8;
    cfg.batch_size = 8;
    cfg.lr = 1e9;
    try {
        train(tr, te, cfg);
        FAIL("expected TrainAbort");
    } catch (const TrainAbort& e) {
        const std::string msg = e.what();
        CHECK(msg.find("non-finite") != std::string::npos);
        CHECK(msg.find("epoch 1") != std::string::npos);
    }
}

TEST_CASE("stats_csv formats the header and one row per epoch") {
    EpochStats st;
    st.epoch = 1;
    st.train_loss = 1.5;
    st.test_loss = 2.5;
    st.test_recon = 2.0;
    st.test_kl = 0.5;
    st.seconds = 0.25;
    const std::string csv = stats_csv({st});
    CHECK(csv.rfind("epoch,train_loss,test_loss,test_recon,test_kl,seconds\n", 0) == 0);
    CHECK(csv.find("\n1,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("generate: count handling, determinism, output range") {
    VaeModel m = make_vae(8, 4, 2, PosteriorKind::diag, Activation::sigmoid, 9);
    NormalRng rng(123);
    CHECK(generate(m, 0, rng).empty());
    CHECK_THROWS_AS(generate(m, -1, rng), std::invalid_argument);

    NormalRng r1(42), r2(42);
    const auto a = generate(m, 5, r1);
    const auto b = generate(m, 5, r2);
    REQUIRE(a.size() == 5);
    CHECK(a == b);
    for (const auto& img : a) {
        REQUIRE(img.size() == 8);
        for (double v : img) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    for (NamedParam& p : param_views(m)) std::fill(p.data.begin(), p.data.end(), 0.0);
    NormalRng r3(7);
    for (const auto& img : generate(m, 3, r3))
        for (double v : img) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("train rejects unusable splits") {
    const Dataset tr = synth_correlated(8, 4, 0.5, 71, Split::train);
    const Dataset other = synth_correlated(4, 3, 0.5, 72, Split::test);
    Dataset empty;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.latent_dim = 2;
    cfg.hidden_dim = 4;
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train(empty, tr, cfg), std::invalid_argument);
    CHECK_THROWS_AS(train(tr, empty, cfg), std::invalid_argument);
    CHECK_THROWS_AS(train(tr, other, cfg), std::invalid_argument);
}
