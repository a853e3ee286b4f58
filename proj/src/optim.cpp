// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace deltalora {

AdamWState make_adamw_state(int rows, int cols, double beta1, double beta2, double eps) {
    AdamWState st;
    st.m = Matrix::zeros(rows, cols);
    st.v = Matrix::zeros(rows, cols);
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps = eps;
    return st;
}

Matrix adamw_step(Matrix& param, const Matrix& grad, AdamWState& state, double eta,
                  double weight_decay) {
    if (!param.same_shape(grad)) {
        throw std::invalid_argument("adamw_step: gradient " + shape_str(grad) +
                                    " does not match parameter " + shape_str(param));
    }
    if (!param.same_shape(state.m)) {
        throw std::invalid_argument("adamw_step: state " + shape_str(state.m) +
                                    " belongs to a different parameter than " + shape_str(param));
    }
    if (!all_finite(grad)) {
        throw std::domain_error("adamw_step: non-finite gradient");
    }

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    Matrix g_hat(param.rows(), param.cols());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data()[i];
        const double m = b1 * state.m.data()[i] + (1.0 - b1) * g;
        const double v = b2 * state.v.data()[i] + (1.0 - b2) * g * g;
        state.m.data()[i] = m;
        state.v.data()[i] = v;
        const double m_hat = m / corr1;
        const double v_hat = v / corr2;
        const double gh = m_hat / (std::sqrt(v_hat) + state.eps);
        g_hat.data()[i] = gh;
        param.data()[i] = param.data()[i] - eta * gh - eta * weight_decay * param.data()[i];
    }
    return g_hat;
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::delta_lora: return "delta_lora";
        case Mode::lora: return "lora";
        case Mode::full_ft: return "full_ft";
        case Mode::ft_qv: return "ft_qv";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "delta_lora") return Mode::delta_lora;
    if (name == "lora") return Mode::lora;
    if (name == "full_ft") return Mode::full_ft;
    if (name == "ft_qv") return Mode::ft_qv;
    throw std::invalid_argument("unknown mode: \"" + name +
                                "\" (expected delta_lora|lora|full_ft|ft_qv)");
}

const char* schedule_name(Schedule s) {
    return s == Schedule::constant ? "constant" : "linear";
}

Schedule schedule_from_name(const std::string& name) {
    if (name == "constant") return Schedule::constant;
    if (name == "linear") return Schedule::linear;
    throw std::invalid_argument("unknown schedule: \"" + name + "\" (expected constant|linear)");
}

} // namespace deltalora
