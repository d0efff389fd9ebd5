#include "sslc2st/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sslc2st/nn.hpp"
#include "sslc2st/rng.hpp"
#include "sslc2st/stats.hpp"

namespace sslc2st {

namespace {

std::string describe(double value) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << value;
    return os.str();
}

double mse_of(const Mlp& m, const Matrix& x, const Matrix& t) { return mse_loss(evaluate(m, x), t); }

} // namespace

CheckResult check_gradients(std::uint64_t seed, int networks) {
    constexpr double step = 1e-5;
    double worst = 0.0;
    const Activation kinds[] = {Activation::relu, Activation::identity, Activation::sigmoid};
    for (int net = 0; net < networks; ++net) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(net)));
        const auto depth = 1 + rng.uniform_index(3);
        std::vector<std::size_t> widths{1 + rng.uniform_index(8)};
        std::vector<Activation> acts;
        for (std::size_t k = 0; k < depth; ++k) {
            widths.push_back(1 + rng.uniform_index(8));
            acts.push_back(kinds[rng.uniform_index(3)]);
        }
        Mlp model = Mlp::glorot(widths, acts, rng);
        // Zero biases put relu units whose inputs are all zero exactly on the
        // kink, where a central difference does not estimate the derivative.
        for (std::size_t k = 0; k < model.depth(); ++k) {
            auto& bias = model.layer(k).bias;
            for (Eigen::Index i = 0; i < bias.size(); ++i) bias(i) = 0.1 * rng.normal();
        }
        Matrix x(4, static_cast<Eigen::Index>(widths.front()));
        Matrix t(4, static_cast<Eigen::Index>(widths.back()));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();

        const auto fr = forward(model, x);
        const Gradients g = backward(model, fr.cache, LossKind::mse, t);
        for (std::size_t k = 0; k < model.depth(); ++k) {
            auto probe = [&](double& param, double analytic) {
                const double saved = param;
                param = saved + step;
                const double up = mse_of(model, x, t);
                param = saved - step;
                const double down = mse_of(model, x, t);
                param = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
                worst = std::max(worst, std::abs(analytic - numeric) / scale);
            };
            auto& layer = model.layer(k);
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i) probe(layer.weight.data()[i], g.layers[k].weight.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias.data()[i], g.layers[k].bias.data()[i]);
        }
    }
    return {"gradients", worst < 1e-5, "max relative error " + describe(worst)};
}

CheckResult check_poisson_binomial() {
    const std::size_t n = 60;
    const double p = 0.3;
    const std::vector<double> probs(n, p);
    const auto pmf = poisson_binomial_pmf(probs);
    double sum = 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        sum += pmf[k];
        const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                                 static_cast<double>(k) * std::log(p) + static_cast<double>(n - k) * std::log1p(-p);
        worst = std::max(worst, std::abs(pmf[k] - std::exp(log_binom)));
    }
    const double mass_error = std::abs(sum - 1.0);
    return {"poisson-binomial", mass_error < 1e-12 && worst < 1e-12,
            "mass error " + describe(mass_error) + ", max |pmf - binomial| " + describe(worst)};
}

CheckResult check_permutation_uniformity(std::uint64_t seed, int trials, std::size_t n_perm) {
    std::vector<double> pvalues;
    int rejections = 0;
    const StatisticFn mean_diff = [](const Matrix& x, const Matrix& y) {
        return embedding_statistic(x, y, EmbeddingNorm::squared_l2);
    };
    for (int t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        Matrix x(20, 1);
        Matrix y(20, 1);
        for (Eigen::Index i = 0; i < 20; ++i) {
            x(i, 0) = rng.normal();
            y(i, 0) = rng.normal();
        }
        const auto out = permutation_test(mean_diff, x, y, {n_perm, 0.05, TieRule::plus_one, rng.uniform_index(1u << 30)});
        pvalues.push_back(out.p_value);
        rejections += out.reject ? 1 : 0;
    }
    const double rate = static_cast<double>(rejections) / trials;
    const double ks = ks_uniform_distance(pvalues);
    std::ostringstream detail;
    detail << "rejection rate " << rate << ", KS distance " << ks;
    return {"permutation-uniformity", rate >= 0.01 && rate <= 0.10 && ks < 0.10, detail.str()};
}

CheckResult check_power_formula() {
    const double limit = theoretical_power({0.5 - 1e-12, 100, 0.05});
    const double z = normal_quantile(0.95);
    const double type1 = 1.0 - normal_cdf(z);
    const double err = std::max(std::abs(limit - 0.05), std::abs(type1 - 0.05));
    return {"power-formula", std::abs(limit - 0.05) < 1e-6 && std::abs(type1 - 0.05) < 1e-10,
            "max deviation from alpha " + describe(err)};
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
    return {check_gradients(seed), check_poisson_binomial(), check_permutation_uniformity(seed),
            check_power_formula()};
}

} // namespace sslc2st
