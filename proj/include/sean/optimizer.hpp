#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sean/seanet.hpp"

namespace sean {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over every tensor of SeanParams. Moments mirror the parameter shapes.
class Adam {
public:
    Adam() = default;
    Adam(const SeanParams& params, AdamConfig cfg) : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t steps() const { return step_; }

    void step(SeanParams& params, const SeanParams& grads) {
        ++step_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        std::vector<Tensor*> p, m, v;
        std::vector<const Tensor*> g;
        params.visit([&](const std::string&, Tensor& t) { p.push_back(&t); });
        m_.visit([&](const std::string&, Tensor& t) { m.push_back(&t); });
        v_.visit([&](const std::string&, Tensor& t) { v.push_back(&t); });
        grads.visit([&](const std::string&, const Tensor& t) { g.push_back(&t); });
        for (std::size_t t = 0; t < p.size(); ++t) {
            double* pd = p[t]->data.data();
            double* md = m[t]->data.data();
            double* vd = v[t]->data.data();
            const double* gd = g[t]->data.data();
            for (std::size_t i = 0; i < p[t]->size(); ++i) {
                md[i] = cfg_.beta1 * md[i] + (1.0 - cfg_.beta1) * gd[i];
                vd[i] = cfg_.beta2 * vd[i] + (1.0 - cfg_.beta2) * gd[i] * gd[i];
                pd[i] -= cfg_.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + cfg_.eps);
            }
        }
    }

    friend bool operator==(const Adam&, const Adam&) = default;

private:
    AdamConfig cfg_;
    SeanParams m_, v_;
    std::uint64_t step_ = 0;
};

} // namespace sean
