#pragma once

// Test-side gradient oracle: central finite differences over fresh forward
// passes. Depends only on forward evaluation, never on backward().

#include <cmath>
#include <functional>
#include <vector>

#include "gdfo/autodiff.hpp"
#include "gdfo/random.hpp"

namespace gdfo::testing {

using BuildFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
    return std::fabs(analytic - numeric) / denom;
}

// Compares backward() gradients of build(inputs) against central differences
// with the given step. Inputs are treated as leaves; build must be a pure
// function of their values.
inline GradCheckResult check_gradients(const BuildFn& build,
                                       const std::vector<Shape>& shapes,
                                       RandomEngine& rng, double magnitude = 2.0,
                                       double step = 1e-5) {
    std::vector<std::vector<double>> values(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        values[i].resize(shape_numel(shapes[i]));
        for (auto& v : values[i]) v = rng.uniform(-magnitude, magnitude);
    }

    auto make_inputs = [&](bool with_grad) {
        std::vector<Tensor> inputs;
        inputs.reserve(shapes.size());
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            Tensor t = Tensor::from(shapes[i], values[i]);
            if (with_grad) t.set_requires_grad(true);
            inputs.push_back(t);
        }
        return inputs;
    };

    auto inputs = make_inputs(true);
    Tensor loss = build(inputs);
    backward(loss);

    GradCheckResult result;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& analytic = inputs[i].grad();
        for (std::size_t j = 0; j < values[i].size(); ++j) {
            const double saved = values[i][j];
            values[i][j] = saved + step;
            const double f_plus = build(make_inputs(false)).item();
            values[i][j] = saved - step;
            const double f_minus = build(make_inputs(false)).item();
            values[i][j] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic[j], numeric));
            ++result.checked;
        }
    }
    return result;
}

}  // namespace gdfo::testing
