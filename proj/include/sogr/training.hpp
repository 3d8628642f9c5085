#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "sogr/networks.hpp"

namespace sogr {

struct TrainConfig {
    enum class Optimizer { adam, sgd };

    float beta = 20.0f;  // L1 weight in the translator objective
    float learning_rate = 2e-4f;
    float adam_beta1 = 0.5f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int batch_size = 1;
    int total_steps = 0;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::adam;

    void validate() const;
};

const char* optimizer_name(TrainConfig::Optimizer kind);
TrainConfig::Optimizer optimizer_from_name(const std::string& name);

// Shared architecture description for one reciprocal model: two translators
// (SAR->optical, optical->SAR) and one discriminator per judged domain.
struct NetConfig {
    int size = 256;
    int depth = 6;
    int ngf = 50;
    int ndf = 64;
    int sar_channels = 1;  // 1 single-pol, 3 full-pol pseudo-color
    int n_stride2 = 3;

    void validate() const;
    TranslatorConfig t_s2o_config() const;
    TranslatorConfig t_o2s_config() const;
    DiscriminatorConfig d_opt_config() const;
    DiscriminatorConfig d_sar_config() const;
};

struct AdamState {
    Tensor m;
    Tensor v;
};

struct ReciprocalModel {
    NetConfig net;
    NetworkParams t_s2o;
    NetworkParams t_o2s;
    NetworkParams d_opt;
    NetworkParams d_sar;
    std::int64_t step = 0;
    // optimizer slots keyed by full tensor path, e.g. "t_s2o/enc0/weight"
    std::map<std::string, AdamState> adam;
};

ReciprocalModel build_model(const NetConfig& cfg, std::uint64_t seed);

// One co-registered batch in model space [-1, 1].
// sar: [B, sar_channels, S, S]; optical: [B, 3, S, S].
struct Batch {
    Tensor sar;
    Tensor optical;
};

struct StepReport {
    double d_opt_loss = 0.0;
    double d_sar_loss = 0.0;
    double gan_loss = 0.0;
    double l1_loss = 0.0;
    double t_loss = 0.0;
};

// -mean(log d_real) - mean(log(1 - d_fake)); probabilities must lie in [0, 1].
NodePtr discriminator_loss(const NodePtr& d_real, const NodePtr& d_fake);
// -mean(log d_fake_s2o) - mean(log d_fake_o2s): sum over directions.
NodePtr translator_gan_loss(const NodePtr& d_fake_s2o, const NodePtr& d_fake_o2s);
// Sum over directions of mean |real - fake| in model space.
NodePtr l1_loss(const NodePtr& fake_opt, const NodePtr& real_opt, const NodePtr& fake_sar,
                const NodePtr& real_sar);
NodePtr translator_loss(const NodePtr& gan, const NodePtr& l1, float beta);

enum class Domain { optical, sar };

// One optimizer application against Eq-style binary log-loss for the given
// discriminator, fakes detached. Returns the minimized loss value (pre-update).
double update_discriminator(ReciprocalModel& model, Domain side, const Batch& batch,
                            const TrainConfig& cfg);

struct TranslatorUpdate {
    double gan = 0.0;
    double l1 = 0.0;
    double total = 0.0;  // gan + beta * l1, combined in 64-bit
};

// Joint optimizer application for both translators on the hybrid objective.
TranslatorUpdate update_translators(ReciprocalModel& model, const Batch& batch,
                                    const TrainConfig& cfg);

// The three sub-steps in order (D_opt, D_sar, translators), then step += 1.
StepReport train_step(ReciprocalModel& model, const Batch& batch, const TrainConfig& cfg);

// Pure observation of all five losses on a batch; no parameters change.
StepReport eval_losses(const ReciprocalModel& model, const Batch& batch, float beta);

}  // namespace sogr
