#include "sogr/training.hpp"

#include <cmath>
#include <cstring>

#include "sogr/errors.hpp"
#include "sogr/rng.hpp"

namespace sogr {

void TrainConfig::validate() const {
    if (beta < 0.0f) throw ConfigError("train: beta must be >= 0");
    if (!(learning_rate > 0.0f)) throw ConfigError("train: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (total_steps < 0) throw ConfigError("train: total_steps must be >= 0");
    if (!(adam_beta1 >= 0.0f && adam_beta1 < 1.0f) || !(adam_beta2 >= 0.0f && adam_beta2 < 1.0f))
        throw ConfigError("train: adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0f)) throw ConfigError("train: adam_eps must be > 0");
}

const char* optimizer_name(TrainConfig::Optimizer kind) {
    return kind == TrainConfig::Optimizer::adam ? "adam" : "sgd";
}

TrainConfig::Optimizer optimizer_from_name(const std::string& name) {
    if (name == "adam") return TrainConfig::Optimizer::adam;
    if (name == "sgd") return TrainConfig::Optimizer::sgd;
    throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

void NetConfig::validate() const {
    if (sar_channels != 1 && sar_channels != 3)
        throw ConfigError("model: sar_channels must be 1 or 3");
    t_s2o_config().validate();
    t_o2s_config().validate();
    d_opt_config().validate();
    d_sar_config().validate();
}

TranslatorConfig NetConfig::t_s2o_config() const {
    return TranslatorConfig{sar_channels, 3, ngf, depth, size};
}

TranslatorConfig NetConfig::t_o2s_config() const {
    return TranslatorConfig{3, sar_channels, ngf, depth, size};
}

DiscriminatorConfig NetConfig::d_opt_config() const {
    return DiscriminatorConfig{3, ndf, n_stride2, size};
}

DiscriminatorConfig NetConfig::d_sar_config() const {
    return DiscriminatorConfig{sar_channels, ndf, n_stride2, size};
}

ReciprocalModel build_model(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ReciprocalModel m;
    m.net = cfg;
    m.t_s2o = build_translator(cfg.t_s2o_config(), mix64(seed, fnv1a64("t_s2o")));
    m.t_o2s = build_translator(cfg.t_o2s_config(), mix64(seed, fnv1a64("t_o2s")));
    m.d_opt = build_discriminator(cfg.d_opt_config(), mix64(seed, fnv1a64("d_opt")));
    m.d_sar = build_discriminator(cfg.d_sar_config(), mix64(seed, fnv1a64("d_sar")));
    return m;
}

namespace {

void check_probability_map(const char* what, const Tensor& t) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        const float v = t[i];
        if (!(v >= 0.0f && v <= 1.0f))
            throw ContractError(std::string(what) + ": probability map element " +
                                std::to_string(v) + " outside [0, 1]");
    }
}

NodePtr neg_mean_log(const NodePtr& x) {
    return mul(scalar_node(-1.0f), mean_all(log_clamped(x)));
}

}  // namespace

NodePtr discriminator_loss(const NodePtr& d_real, const NodePtr& d_fake) {
    check_probability_map("discriminator_loss(d_real)", d_real->value);
    check_probability_map("discriminator_loss(d_fake)", d_fake->value);
    NodePtr one_minus_fake = sub(scalar_node(1.0f), d_fake);
    return add(neg_mean_log(d_real), neg_mean_log(one_minus_fake));
}

NodePtr translator_gan_loss(const NodePtr& d_fake_s2o, const NodePtr& d_fake_o2s) {
    check_probability_map("translator_gan_loss(s2o)", d_fake_s2o->value);
    check_probability_map("translator_gan_loss(o2s)", d_fake_o2s->value);
    return add(neg_mean_log(d_fake_s2o), neg_mean_log(d_fake_o2s));
}

NodePtr l1_loss(const NodePtr& fake_opt, const NodePtr& real_opt, const NodePtr& fake_sar,
                const NodePtr& real_sar) {
    if (!fake_opt->value.same_shape(real_opt->value))
        throw ShapeError("l1_loss: optical shapes differ: " + shape_str(fake_opt->value.shape()) +
                         " vs " + shape_str(real_opt->value.shape()));
    if (!fake_sar->value.same_shape(real_sar->value))
        throw ShapeError("l1_loss: sar shapes differ: " + shape_str(fake_sar->value.shape()) +
                         " vs " + shape_str(real_sar->value.shape()));
    NodePtr opt_term = mean_all(abs(sub(real_opt, fake_opt)));
    NodePtr sar_term = mean_all(abs(sub(real_sar, fake_sar)));
    return add(opt_term, sar_term);
}

NodePtr translator_loss(const NodePtr& gan, const NodePtr& l1, float beta) {
    if (gan->value.numel() != 1 || l1->value.numel() != 1)
        throw ContractError("translator_loss: inputs must be scalars");
    return add(gan, mul(scalar_node(beta), l1));
}

namespace {

struct ParamBinding {
    std::string path;
    Tensor* param;
    const Node* node;
};

void collect_bindings(NetworkParams& params, const BoundNet& bound, const std::string& prefix,
                      std::vector<ParamBinding>& out) {
    if (params.layers.size() != bound.layers.size())
        throw ContractError("optimizer: bound net does not match parameter set");
    for (size_t i = 0; i < params.layers.size(); ++i) {
        LayerParams& l = params.layers[i];
        const BoundLayer& b = bound.layers[i];
        if (l.name != b.name)
            throw ContractError("optimizer: layer order mismatch at '" + l.name + "'");
        const std::string base = prefix + "/" + l.name + "/";
        out.push_back({base + "weight", &l.weight, b.weight.get()});
        if (l.bias) out.push_back({base + "bias", &*l.bias, b.bias.get()});
        if (l.norm_scale) out.push_back({base + "norm_scale", &*l.norm_scale, b.norm_scale.get()});
        if (l.norm_shift) out.push_back({base + "norm_shift", &*l.norm_shift, b.norm_shift.get()});
    }
}

void apply_optimizer(std::vector<ParamBinding>& binds, const GradMap& grads,
                     ReciprocalModel& model, const TrainConfig& cfg) {
    const std::int64_t t = model.step + 1;
    const float lr = cfg.learning_rate;
    for (auto& b : binds) {
        Tensor& p = *b.param;
        Tensor zero;
        const Tensor* g;
        if (auto it = grads.find(b.node); it != grads.end()) {
            g = &it->second;
        } else {
            zero = Tensor::zeros(p.shape());
            g = &zero;
        }
        if (cfg.optimizer == TrainConfig::Optimizer::sgd) {
            for (std::int64_t i = 0; i < p.numel(); ++i) p[i] -= lr * (*g)[i];
            continue;
        }
        AdamState& st = model.adam[b.path];
        if (!st.m.defined()) {
            st.m = Tensor::zeros(p.shape());
            st.v = Tensor::zeros(p.shape());
        } else if (!st.m.same_shape(p)) {
            throw ContractError("optimizer: stale state shape for '" + b.path + "'");
        }
        const float b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const float c1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b1), t));
        const float c2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b2), t));
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            const float gi = (*g)[i];
            const float m = b1 * st.m[i] + (1.0f - b1) * gi;
            const float v = b2 * st.v[i] + (1.0f - b2) * gi * gi;
            st.m[i] = m;
            st.v[i] = v;
            const float mhat = m / c1;
            const float vhat = v / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v))
        throw NumericError(std::string(term) + " is not finite (" + std::to_string(v) + ")");
}

void check_batch(const ReciprocalModel& model, const Batch& batch) {
    const Tensor& s = batch.sar;
    const Tensor& o = batch.optical;
    if (!s.defined() || !o.defined() || s.rank() != 4 || o.rank() != 4 || s.dim(0) < 1)
        throw ShapeError("train: batch tensors must be non-empty [B, C, H, W]");
    if (s.dim(0) != o.dim(0))
        throw ShapeError("train: sar/optical batch sizes differ: " + shape_str(s.shape()) +
                         " vs " + shape_str(o.shape()));
    const NetConfig& n = model.net;
    if (s.dim(1) != n.sar_channels || s.dim(2) != n.size || s.dim(3) != n.size)
        throw ShapeError("train: sar batch " + shape_str(s.shape()) + " does not match model [B, " +
                         std::to_string(n.sar_channels) + ", " + std::to_string(n.size) + ", " +
                         std::to_string(n.size) + "]");
    if (o.dim(1) != 3 || o.dim(2) != n.size || o.dim(3) != n.size)
        throw ShapeError("train: optical batch " + shape_str(o.shape()) +
                         " does not match model [B, 3, " + std::to_string(n.size) + ", " +
                         std::to_string(n.size) + "]");
}

}  // namespace

double update_discriminator(ReciprocalModel& model, Domain side, const Batch& batch,
                            const TrainConfig& cfg) {
    cfg.validate();
    check_batch(model, batch);
    const bool opt_side = (side == Domain::optical);
    NetworkParams& disc = opt_side ? model.d_opt : model.d_sar;
    NetworkParams& trans = opt_side ? model.t_s2o : model.t_o2s;
    const TranslatorConfig tcfg = opt_side ? model.net.t_s2o_config() : model.net.t_o2s_config();
    const DiscriminatorConfig dcfg = opt_side ? model.net.d_opt_config() : model.net.d_sar_config();
    const Tensor& real = opt_side ? batch.optical : batch.sar;
    const Tensor& source = opt_side ? batch.sar : batch.optical;

    BoundNet bt = bind_params(trans, false);  // fakes detached from the translator
    NodePtr fake = translator_forward(tcfg, bt, constant(source));
    BoundNet bd = bind_params(disc, true);
    NodePtr d_real = discriminator_forward(dcfg, bd, constant(real));
    NodePtr d_fake = discriminator_forward(dcfg, bd, fake);
    NodePtr loss = discriminator_loss(d_real, d_fake);
    const double value = loss->value[0];
    check_finite(value, opt_side ? "L(D_opt)" : "L(D_sar)");

    GradMap grads = backward(loss);
    std::vector<ParamBinding> binds;
    collect_bindings(disc, bd, opt_side ? "d_opt" : "d_sar", binds);
    apply_optimizer(binds, grads, model, cfg);
    return value;
}

TranslatorUpdate update_translators(ReciprocalModel& model, const Batch& batch,
                                    const TrainConfig& cfg) {
    cfg.validate();
    check_batch(model, batch);
    BoundNet bt_s2o = bind_params(model.t_s2o, true);
    BoundNet bt_o2s = bind_params(model.t_o2s, true);
    NodePtr real_sar = constant(batch.sar);
    NodePtr real_opt = constant(batch.optical);
    NodePtr fake_opt = translator_forward(model.net.t_s2o_config(), bt_s2o, real_sar);
    NodePtr fake_sar = translator_forward(model.net.t_o2s_config(), bt_o2s, real_opt);

    BoundNet bd_opt = bind_params(model.d_opt, false);
    BoundNet bd_sar = bind_params(model.d_sar, false);
    NodePtr df_opt = discriminator_forward(model.net.d_opt_config(), bd_opt, fake_opt);
    NodePtr df_sar = discriminator_forward(model.net.d_sar_config(), bd_sar, fake_sar);

    NodePtr gan = translator_gan_loss(df_opt, df_sar);
    NodePtr l1 = l1_loss(fake_opt, real_opt, fake_sar, real_sar);
    NodePtr total = translator_loss(gan, l1, cfg.beta);

    TranslatorUpdate u;
    u.gan = gan->value[0];
    u.l1 = l1->value[0];
    check_finite(u.gan, "L_GAN(T)");
    check_finite(u.l1, "L_L1(T)");
    check_finite(total->value[0], "L(T)");
    u.total = u.gan + static_cast<double>(cfg.beta) * u.l1;

    GradMap grads = backward(total);
    std::vector<ParamBinding> binds;
    collect_bindings(model.t_s2o, bt_s2o, "t_s2o", binds);
    collect_bindings(model.t_o2s, bt_o2s, "t_o2s", binds);
    apply_optimizer(binds, grads, model, cfg);
    return u;
}

StepReport train_step(ReciprocalModel& model, const Batch& batch, const TrainConfig& cfg) {
    StepReport r;
    r.d_opt_loss = update_discriminator(model, Domain::optical, batch, cfg);
    r.d_sar_loss = update_discriminator(model, Domain::sar, batch, cfg);
    const TranslatorUpdate u = update_translators(model, batch, cfg);
    r.gan_loss = u.gan;
    r.l1_loss = u.l1;
    r.t_loss = u.total;
    model.step += 1;
    return r;
}

StepReport eval_losses(const ReciprocalModel& model, const Batch& batch, float beta) {
    check_batch(model, batch);
    BoundNet bt_s2o = bind_params(model.t_s2o, false);
    BoundNet bt_o2s = bind_params(model.t_o2s, false);
    BoundNet bd_opt = bind_params(model.d_opt, false);
    BoundNet bd_sar = bind_params(model.d_sar, false);
    NodePtr real_sar = constant(batch.sar);
    NodePtr real_opt = constant(batch.optical);
    NodePtr fake_opt = translator_forward(model.net.t_s2o_config(), bt_s2o, real_sar);
    NodePtr fake_sar = translator_forward(model.net.t_o2s_config(), bt_o2s, real_opt);

    NodePtr dr_opt = discriminator_forward(model.net.d_opt_config(), bd_opt, real_opt);
    NodePtr df_opt = discriminator_forward(model.net.d_opt_config(), bd_opt, fake_opt);
    NodePtr dr_sar = discriminator_forward(model.net.d_sar_config(), bd_sar, real_sar);
    NodePtr df_sar = discriminator_forward(model.net.d_sar_config(), bd_sar, fake_sar);

    StepReport r;
    r.d_opt_loss = discriminator_loss(dr_opt, df_opt)->value[0];
    r.d_sar_loss = discriminator_loss(dr_sar, df_sar)->value[0];
    r.gan_loss = translator_gan_loss(df_opt, df_sar)->value[0];
    r.l1_loss = l1_loss(fake_opt, real_opt, fake_sar, real_sar)->value[0];
    r.t_loss = r.gan_loss + static_cast<double>(beta) * r.l1_loss;
    return r;
}

}  // namespace sogr
