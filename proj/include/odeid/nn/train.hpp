#pragma once

#include "odeid/nn/adam.hpp"
#include "odeid/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace odeid::nn {

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double data_term = 0.0;
    double lipschitz = 0.0;
};

struct FitResult {
    std::size_t epochs_run = 0;
    EpochStats first;
    EpochStats last;  // statistics of the returned parameters
    bool stopped_early = false;
};

/// Full-batch Adam. `loss_for(epoch)` supplies the loss for that epoch (so
/// probe sets may be redrawn); `stop(stats)` is consulted on the current
/// parameters before each update and ends training when it returns true.
/// The model returned always corresponds to `last`.
template <typename LossFor, typename Stop>
FitResult fit_full_batch(MlpModel& model, const Mat& x, const Mat& y, LossFor&& loss_for, const AdamConfig& adam,
                         std::size_t max_epochs, Stop&& stop) {
    AdamState state = AdamState::for_model(model, adam);
    FitResult r;
    for (std::size_t epoch = 0;; ++epoch) {
        const LossFn loss = loss_for(epoch);
        LossGradient lg = mlp_param_gradients(model, x, y, loss);
        if (!std::isfinite(lg.loss) || !lg.grads.all_finite())
            throw TrainingFailure("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
        const EpochStats s{epoch, lg.loss, lg.data_term, std::isnan(lg.lipschitz) ? 0.0 : lg.lipschitz};
        if (epoch == 0) r.first = s;
        r.last = s;
        r.epochs_run = epoch;
        if (epoch >= max_epochs) break;
        if (stop(s)) {
            r.stopped_early = true;
            break;
        }
        adam_step(model, lg.grads, state);
        state.learning_rate = std::max(adam.min_learning_rate, state.learning_rate * adam.decay);
    }
    return r;
}

template <typename LossFor>
FitResult fit_full_batch(MlpModel& model, const Mat& x, const Mat& y, LossFor&& loss_for, const AdamConfig& adam,
                         std::size_t epochs) {
    return fit_full_batch(model, x, y, std::forward<LossFor>(loss_for), adam, epochs,
                          [](const EpochStats&) { return false; });
}

}  // namespace odeid::nn
