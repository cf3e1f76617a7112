#include <doctest.h>

#include <cmath>

#include "bpsim/net.hpp"

using namespace bpsim;

namespace {

std::vector<double> random_obs(Rng& rng, int n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform();
    return v;
}

std::vector<std::uint8_t> random_mask(Rng& rng, int n) {
    std::vector<std::uint8_t> m(n, 0);
    for (auto& b : m) b = rng.uniform() < 0.5 ? 1 : 0;
    m[n - 1] = 1; // mirror the simulator: the last action is always feasible
    return m;
}

} // namespace

TEST_CASE("zero parameters give uniform feasible probabilities and value 0") {
    PolicyNet net(6, 5, 16);
    std::vector<double> obs(6, 0.3);
    std::vector<std::uint8_t> mask = {1, 0, 1, 0, 1};
    auto f = net.forward(obs, mask);
    CHECK(f.value == 0.0);
    CHECK(f.probs[0] == doctest::Approx(1.0 / 3));
    CHECK(f.probs[1] == 0.0);
    CHECK(f.probs[2] == doctest::Approx(1.0 / 3));
    CHECK(f.probs[3] == 0.0);
    CHECK(f.probs[4] == doctest::Approx(1.0 / 3));
}

TEST_CASE("masked probabilities are exactly zero and sum to one") {
    Rng rng(7);
    PolicyNet net(8, 6, 24);
    net.init(rng);
    for (int trial = 0; trial < 10000; ++trial) {
        auto obs = random_obs(rng, 8);
        auto mask = random_mask(rng, 6);
        auto f = net.forward(obs, mask);
        double sum = 0.0;
        for (int i = 0; i < 6; ++i) {
            if (!mask[i]) REQUIRE(f.probs[i] == 0.0);
            sum += f.probs[i];
        }
        REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("only-postpone mask puts probability one on postpone") {
    Rng rng(3);
    PolicyNet net(4, 4, 8);
    net.init(rng);
    std::vector<std::uint8_t> mask = {0, 0, 0, 1};
    auto f = net.forward(random_obs(rng, 4), mask);
    CHECK(f.probs[3] == 1.0);
    CHECK(f.probs[0] == 0.0);
}

TEST_CASE("forward is deterministic") {
    Rng rng(11);
    PolicyNet net(5, 3, 12);
    net.init(rng);
    auto obs = random_obs(rng, 5);
    std::vector<std::uint8_t> mask = {1, 1, 1};
    auto a = net.forward(obs, mask);
    auto b = net.forward(obs, mask);
    CHECK(a.value == b.value);
    CHECK(a.probs == b.probs);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(2024);
    const int n_in = 5, n_act = 4, hidden = 8;
    for (int point = 0; point < 20; ++point) {
        PolicyNet net(n_in, n_act, hidden);
        net.init(rng);
        auto obs = random_obs(rng, n_in);
        auto mask = random_mask(rng, n_act);
        // pick a feasible action
        int action = -1;
        for (int i = 0; i < n_act; ++i)
            if (mask[i]) action = i;

        bool check_value = point % 2 == 0;
        auto scalar = [&](const PolicyNet& n) {
            auto f = n.forward(obs, mask);
            return check_value ? f.value : f.logp[action];
        };

        // analytic gradient
        auto f = net.forward(obs, mask);
        std::vector<double> grad(net.param_count(), 0.0);
        std::vector<double> dlogits(n_act, 0.0);
        double dvalue = 0.0;
        if (check_value) {
            dvalue = 1.0;
        } else {
            for (int i = 0; i < n_act; ++i)
                if (mask[i]) dlogits[i] = (i == action ? 1.0 : 0.0) - f.probs[i];
        }
        net.backward(obs, f, dlogits, dvalue, grad);

        // compare on a sample of parameters plus every bias
        PolicyNet probe = net;
        for (std::size_t p = 0; p < net.param_count(); p += 7) {
            double h = 1e-5 * std::max(1.0, std::fabs(net.params()[p]));
            probe.params()[p] = net.params()[p] + h;
            double up = scalar(probe);
            probe.params()[p] = net.params()[p] - h;
            double down = scalar(probe);
            probe.params()[p] = net.params()[p];
            double fd = (up - down) / (2.0 * h);
            double denom = std::max({std::fabs(fd), std::fabs(grad[p]), 1e-6});
            REQUIRE(std::fabs(fd - grad[p]) / denom <= 1e-4);
        }
    }
}

TEST_CASE("adam with zero learning rate leaves parameters bit-identical") {
    Rng rng(5);
    PolicyNet net(4, 3, 8);
    net.init(rng);
    auto before = net.params();
    Adam adam(net.param_count());
    std::vector<double> grad(net.param_count());
    for (auto& g : grad) g = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) adam.step(net.params(), grad, 0.0);
    CHECK(net.params() == before);
}

TEST_CASE("masked softmax requires at least one feasible action") {
    std::vector<double> logits = {0.1, 0.2};
    std::vector<std::uint8_t> mask = {0, 0};
    std::vector<double> probs, logp;
    CHECK_THROWS_AS(PolicyNet::masked_softmax(logits, mask, probs, logp), Error);
}
