#include "puttlab/nets.hpp"

#include <cmath>

#include "puttlab/rng.hpp"

namespace puttlab::nets {

namespace {

std::string slot(const std::string& prefix, const char* leafname) {
  return prefix + "." + leafname;
}

void add_cbp_slots(std::vector<ParamSlot>& out, const std::string& prefix, int c_in, int c_out,
                   int kernel) {
  out.push_back({slot(prefix, "conv.w"), {c_out, c_in, kernel}, ParamSlot::Init::uniform,
                 static_cast<std::int64_t>(c_in) * kernel});
  out.push_back({slot(prefix, "conv.b"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.gamma"), {c_out}, ParamSlot::Init::one, 1});
  out.push_back({slot(prefix, "bn.beta"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.running_mean"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.running_var"), {c_out}, ParamSlot::Init::one, 1});
  out.push_back({slot(prefix, "prelu.alpha"), {c_out}, ParamSlot::Init::prelu_alpha, 1});
}

// Transposed-conv CBP (approach unpooling): weight layout [c_in, c_out, k].
void add_tcbp_slots(std::vector<ParamSlot>& out, const std::string& prefix, int c_in, int c_out,
                    int kernel) {
  out.push_back({slot(prefix, "conv.w"), {c_in, c_out, kernel}, ParamSlot::Init::uniform,
                 static_cast<std::int64_t>(c_in) * kernel});
  out.push_back({slot(prefix, "conv.b"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.gamma"), {c_out}, ParamSlot::Init::one, 1});
  out.push_back({slot(prefix, "bn.beta"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.running_mean"), {c_out}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "bn.running_var"), {c_out}, ParamSlot::Init::one, 1});
  out.push_back({slot(prefix, "prelu.alpha"), {c_out}, ParamSlot::Init::prelu_alpha, 1});
}

void add_lstm_slots(std::vector<ParamSlot>& out, const std::string& prefix, int f, int h) {
  out.push_back({slot(prefix, "w_ih"), {4 * h, f}, ParamSlot::Init::uniform, f});
  out.push_back({slot(prefix, "w_hh"), {4 * h, h}, ParamSlot::Init::uniform, h});
  out.push_back({slot(prefix, "b_ih"), {4 * h}, ParamSlot::Init::zero, 1});
  out.push_back({slot(prefix, "b_hh"), {4 * h}, ParamSlot::Init::zero, 1});
}

}  // namespace

const char* variant_name(Variant v) { return v == Variant::approach ? "approach" : "putt"; }

Variant variant_from_name(const std::string& name) {
  if (name == "approach") return Variant::approach;
  if (name == "putt") return Variant::putt;
  throw Error("unknown variant: " + name);
}

std::int64_t ArchConfig::alignment() const {
  std::int64_t a = 1;
  for (int i = 0; i < depth; ++i) a *= pool_stride;
  return a;
}

void ArchConfig::validate() const {
  if (depth < 1) throw Error("ArchConfig: depth must be >= 1");
  if (static_cast<int>(channels.size()) != depth)
    throw Error("ArchConfig: channels list must have one entry per level");
  for (int c : channels)
    if (c < 1) throw Error("ArchConfig: channel counts must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw Error("ArchConfig: kernel_size must be odd and positive");
  if (pool_stride < 2) throw Error("ArchConfig: pool_stride must be >= 2");
  if (variant == Variant::putt) {
    if (lstm_layers < 1 || dense_blocks < 1)
      throw Error("ArchConfig: putt variant needs lstm_layers >= 1 and dense_blocks >= 1");
    if (dense_dilations.empty()) throw Error("ArchConfig: dense_dilations must be non-empty");
    for (int d : dense_dilations)
      if (d < 1) throw Error("ArchConfig: dilations must be positive");
  } else {
    if (lstm_layers != 0 || dense_blocks != 0)
      throw Error("ArchConfig: approach variant has no LSTM or dense blocks");
  }
}

ArchConfig ArchConfig::approach_default() {
  ArchConfig a;
  a.variant = Variant::approach;
  a.lstm_layers = 0;
  a.dense_blocks = 0;
  a.dense_dilations.clear();
  return a;
}

ArchConfig ArchConfig::putt_default() { return ArchConfig{}; }

std::vector<ParamSlot> param_slots(const ArchConfig& arch) {
  arch.validate();
  std::vector<ParamSlot> slots;
  const int k = arch.kernel_size;

  int c_prev = arch.input_channels();
  for (int i = 0; i < arch.depth; ++i) {
    const int c = arch.channels[static_cast<std::size_t>(i)];
    const std::string enc = "enc" + std::to_string(i);
    add_cbp_slots(slots, enc + ".cbp0", c_prev, c, k);
    add_cbp_slots(slots, enc + ".cbp1", c, c, k);
    if (i == 0 && arch.variant == Variant::putt) {
      for (int b = 0; b < arch.dense_blocks; ++b) {
        const std::string dense = "dense" + std::to_string(b);
        for (std::size_t j = 0; j < arch.dense_dilations.size(); ++j) {
          add_cbp_slots(slots, dense + ".layer" + std::to_string(j),
                        c * static_cast<int>(j + 1), c, k);
        }
        add_cbp_slots(slots, dense + ".reduce",
                      c * static_cast<int>(arch.dense_dilations.size() + 1), c, 1);
      }
    }
    add_cbp_slots(slots, "pool" + std::to_string(i), c, c, k);
    c_prev = c;
  }

  if (arch.variant == Variant::putt) {
    const int cb = arch.bottleneck_channels();
    const int h = arch.lstm_hidden_or_default();
    int f = cb;
    for (int l = 0; l < arch.lstm_layers; ++l) {
      const std::string lstm = "lstm" + std::to_string(l);
      add_lstm_slots(slots, lstm + ".fw", f, h);
      add_lstm_slots(slots, lstm + ".bw", f, h);
      f = 2 * h;
    }
    slots.push_back({"lstm_proj.w", {cb, 2 * h}, ParamSlot::Init::uniform, 2 * h});
    slots.push_back({"lstm_proj.b", {cb}, ParamSlot::Init::zero, 1});
  }

  for (int i = arch.depth - 1; i >= 0; --i) {
    const int c = arch.channels[static_cast<std::size_t>(i)];
    const int c_above =
        i == arch.depth - 1 ? arch.channels.back() : arch.channels[static_cast<std::size_t>(i + 1)];
    const std::string unpool = "unpool" + std::to_string(i);
    if (arch.variant == Variant::putt) {
      // Sub-pixel upsampling: conv to pool_stride*c channels, then a shuffle;
      // batch norm and PReLU act on the shuffled c-channel map.
      slots.push_back({slot(unpool, "conv.w"), {arch.pool_stride * c, c_above, k},
                       ParamSlot::Init::uniform, static_cast<std::int64_t>(c_above) * k});
      slots.push_back({slot(unpool, "conv.b"), {arch.pool_stride * c}, ParamSlot::Init::zero, 1});
      slots.push_back({slot(unpool, "bn.gamma"), {c}, ParamSlot::Init::one, 1});
      slots.push_back({slot(unpool, "bn.beta"), {c}, ParamSlot::Init::zero, 1});
      slots.push_back({slot(unpool, "bn.running_mean"), {c}, ParamSlot::Init::zero, 1});
      slots.push_back({slot(unpool, "bn.running_var"), {c}, ParamSlot::Init::one, 1});
      slots.push_back({slot(unpool, "prelu.alpha"), {c}, ParamSlot::Init::prelu_alpha, 1});
    } else {
      add_tcbp_slots(slots, unpool, c_above, c, arch.pool_stride);
    }
    const std::string dec = "dec" + std::to_string(i);
    add_cbp_slots(slots, dec + ".cbp0", 2 * c, c, k);
    add_cbp_slots(slots, dec + ".cbp1", c, c, k);
  }

  slots.push_back({"head.w", {1, arch.channels.front(), 1}, ParamSlot::Init::uniform,
                   arch.channels.front()});
  slots.push_back({"head.b", {1}, ParamSlot::Init::zero, 1});
  return slots;
}

bool is_trainable(const std::string& name) {
  return name.find(".running_") == std::string::npos;
}

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  ModelParams params;
  params.arch = arch;
  Rng rng(mix_seed(seed, 0x1217));
  for (const auto& s : param_slots(arch)) {
    TensorData td;
    td.shape = s.shape;
    const std::int64_t n = ad::shape_size(s.shape);
    td.data.resize(static_cast<std::size_t>(n));
    switch (s.init) {
      case ParamSlot::Init::uniform: {
        const double b = std::sqrt(1.0 / static_cast<double>(s.fan_in));
        for (auto& v : td.data) v = rng.uniform(-b, b);
        break;
      }
      case ParamSlot::Init::zero:
        break;
      case ParamSlot::Init::one:
        for (auto& v : td.data) v = 1.0;
        break;
      case ParamSlot::Init::prelu_alpha:
        for (auto& v : td.data) v = 0.25;
        break;
    }
    params.tensors.emplace(s.name, std::move(td));
  }
  return params;
}

// ---- forward graph ----------------------------------------------------------

namespace {

struct GraphCtx {
  const ArchConfig* arch;
  const std::map<std::string, ad::Tensor>* leaves;
  const std::map<std::string, std::vector<double>*>* buffers;
  ad::BnMode mode;

  const ad::Tensor& leaf(const std::string& name) const {
    auto it = leaves->find(name);
    if (it == leaves->end()) throw Error("missing parameter tensor: " + name);
    return it->second;
  }
  std::vector<double>* buffer(const std::string& name) const {
    auto it = buffers->find(name);
    if (it == buffers->end()) throw Error("missing buffer: " + name);
    return it->second;
  }

  ad::Tensor bn_prelu(const ad::Tensor& x, const std::string& prefix) const {
    ad::Tensor y = ad::batch_norm(x, leaf(prefix + ".bn.gamma"), leaf(prefix + ".bn.beta"),
                                  buffer(prefix + ".bn.running_mean"),
                                  buffer(prefix + ".bn.running_var"), mode);
    return ad::prelu(y, leaf(prefix + ".prelu.alpha"));
  }

  ad::Tensor cbp(const ad::Tensor& x, const std::string& prefix, int stride = 1,
                 int dilation = 1) const {
    const int k = arch->kernel_size;
    const int pad = dilation * (k - 1) / 2;
    ad::Tensor y = ad::conv1d(x, leaf(prefix + ".conv.w"), leaf(prefix + ".conv.b"), stride,
                              dilation, pad);
    return bn_prelu(y, prefix);
  }

  // 1x1 CBP used by the dense-block channel reduction.
  ad::Tensor cbp1x1(const ad::Tensor& x, const std::string& prefix) const {
    ad::Tensor y = ad::conv1d(x, leaf(prefix + ".conv.w"), leaf(prefix + ".conv.b"), 1, 1, 0);
    return bn_prelu(y, prefix);
  }

  ad::Tensor dense_block(const ad::Tensor& x, const std::string& prefix) const {
    ad::Tensor cat = x;
    for (std::size_t j = 0; j < arch->dense_dilations.size(); ++j) {
      const ad::Tensor out =
          cbp(cat, prefix + ".layer" + std::to_string(j), 1,
              arch->dense_dilations[j]);
      cat = ad::concat_channels(cat, out);
    }
    return cbp1x1(cat, prefix + ".reduce");
  }

  ad::Tensor unpool(const ad::Tensor& x, const std::string& prefix) const {
    if (arch->variant == Variant::putt) {
      ad::Tensor y = ad::subpixel_conv1d(x, leaf(prefix + ".conv.w"), leaf(prefix + ".conv.b"),
                                         arch->pool_stride);
      return bn_prelu(y, prefix);
    }
    ad::Tensor y = ad::conv_transpose1d(x, leaf(prefix + ".conv.w"), leaf(prefix + ".conv.b"),
                                        arch->pool_stride);
    return bn_prelu(y, prefix);
  }
};

}  // namespace

ad::Tensor forward_graph(const ArchConfig& arch,
                         const std::map<std::string, ad::Tensor>& leaves,
                         const std::map<std::string, std::vector<double>*>& buffers,
                         const ad::Tensor& input, ad::BnMode mode) {
  if (input.shape().size() != 2 || input.shape()[0] != arch.input_channels())
    throw ShapeMismatch("forward_graph: unexpected input shape");
  GraphCtx ctx{&arch, &leaves, &buffers, mode};

  ad::Tensor cur = input;
  std::vector<ad::Tensor> skips;
  for (int i = 0; i < arch.depth; ++i) {
    const std::string enc = "enc" + std::to_string(i);
    cur = ctx.cbp(cur, enc + ".cbp0");
    cur = ctx.cbp(cur, enc + ".cbp1");
    if (i == 0 && arch.variant == Variant::putt) {
      // Dilated dense stack before any pooling, where the temporal context
      // of plain convolutions is narrowest.
      for (int b = 0; b < arch.dense_blocks; ++b)
        cur = ctx.dense_block(cur, "dense" + std::to_string(b));
    }
    skips.push_back(cur);
    cur = ctx.cbp(cur, "pool" + std::to_string(i), arch.pool_stride);
  }

  if (arch.variant == Variant::putt) {
    ad::Tensor seq = ad::transpose2d(cur);  // [T', C]
    for (int l = 0; l < arch.lstm_layers; ++l) {
      const std::string prefix = "lstm" + std::to_string(l);
      ad::LstmParams fw{ctx.leaf(prefix + ".fw.w_ih"), ctx.leaf(prefix + ".fw.w_hh"),
                        ctx.leaf(prefix + ".fw.b_ih"), ctx.leaf(prefix + ".fw.b_hh")};
      ad::LstmParams bw{ctx.leaf(prefix + ".bw.w_ih"), ctx.leaf(prefix + ".bw.w_hh"),
                        ctx.leaf(prefix + ".bw.b_ih"), ctx.leaf(prefix + ".bw.b_hh")};
      seq = ad::bilstm(seq, fw, bw);
    }
    seq = ad::linear(seq, ctx.leaf("lstm_proj.w"), ctx.leaf("lstm_proj.b"));
    cur = ad::transpose2d(seq);
  }

  for (int i = arch.depth - 1; i >= 0; --i) {
    cur = ctx.unpool(cur, "unpool" + std::to_string(i));
    cur = ad::concat_channels(skips[static_cast<std::size_t>(i)], cur);
    const std::string dec = "dec" + std::to_string(i);
    cur = ctx.cbp(cur, dec + ".cbp0");
    cur = ctx.cbp(cur, dec + ".cbp1");
  }

  return ad::conv1d(cur, ctx.leaf("head.w"), ctx.leaf("head.b"), 1, 1, 0);
}

// ---- inference model -------------------------------------------------------

Model::Model(ModelParams params) : params_(std::move(params)) {
  params_.arch.validate();
  for (auto& [name, td] : params_.tensors) {
    if (!signal::is_finite(td.data)) throw Error("non-finite parameter tensor: " + name);
    leaves_.emplace(name, ad::Tensor::leaf(td.shape, td.data, false));
    if (!is_trainable(name)) buffers_.emplace(name, &td.data);
  }
  // Confirm the tensor set matches the architecture.
  const auto slots = param_slots(params_.arch);
  if (slots.size() != params_.tensors.size())
    throw Error("parameter count does not match architecture");
  for (const auto& s : slots) {
    auto it = params_.tensors.find(s.name);
    if (it == params_.tensors.end()) throw Error("missing parameter tensor: " + s.name);
    if (it->second.shape != s.shape) throw Error("parameter shape mismatch: " + s.name);
  }
}

void Model::check_aligned(std::size_t len) const {
  const std::int64_t align = params_.arch.alignment();
  if (len == 0 || static_cast<std::int64_t>(len) % align != 0) {
    throw LengthNotAligned("input length " + std::to_string(len) +
                           " must be a positive multiple of " + std::to_string(align));
  }
}

ad::Tensor Model::run(const ad::Tensor& input) const {
  return forward_graph(params_.arch, leaves_, buffers_, input, ad::BnMode::eval);
}

signal::Waveform Model::approach(const signal::Waveform& x) const {
  if (role() != Variant::approach) throw RoleMismatch("approach() on a putt model");
  signal::check_waveform(x, "approach input");
  check_aligned(x.samples.size());
  const ad::Tensor input =
      ad::Tensor::leaf({1, static_cast<std::int64_t>(x.samples.size())}, x.samples, false);
  const ad::Tensor out = run(input);
  signal::Waveform y;
  y.sample_rate = x.sample_rate;
  y.samples = out.value();
  return y;
}

signal::Waveform Model::putt_artifact(const signal::Waveform& enhanced,
                                      const signal::Waveform& noisy) const {
  if (role() != Variant::putt) throw RoleMismatch("putt_artifact() on an approach model");
  signal::check_waveform(enhanced, "putt enhanced input");
  signal::check_waveform(noisy, "putt noisy input");
  if (enhanced.samples.size() != noisy.samples.size())
    throw LengthMismatch("enhanced and noisy inputs differ in length");
  check_aligned(enhanced.samples.size());

  const std::int64_t t = static_cast<std::int64_t>(enhanced.samples.size());
  std::vector<double> stacked;
  stacked.reserve(static_cast<std::size_t>(2 * t));
  stacked.insert(stacked.end(), enhanced.samples.begin(), enhanced.samples.end());
  stacked.insert(stacked.end(), noisy.samples.begin(), noisy.samples.end());
  const ad::Tensor input = ad::Tensor::leaf({2, t}, std::move(stacked), false);
  const ad::Tensor out = run(input);
  signal::Waveform y;
  y.sample_rate = enhanced.sample_rate;
  y.samples = out.value();
  return y;
}

signal::Waveform Model::apply_putt(const signal::Waveform& enhanced,
                                   const signal::Waveform& noisy) const {
  signal::Waveform xi = putt_artifact(enhanced, noisy);
  signal::Waveform y;
  y.sample_rate = enhanced.sample_rate;
  y.samples.resize(enhanced.samples.size());
  for (std::size_t i = 0; i < y.samples.size(); ++i)
    y.samples[i] = enhanced.samples[i] - xi.samples[i];
  return y;
}

signal::Waveform approach_forward(const ModelParams& params, const signal::Waveform& x) {
  return Model(params).approach(x);
}

signal::Waveform putt_forward(const ModelParams& params, const signal::Waveform& enhanced,
                              const signal::Waveform& noisy) {
  return Model(params).putt_artifact(enhanced, noisy);
}

signal::Waveform apply_putt(const ModelParams& params, const signal::Waveform& enhanced,
                            const signal::Waveform& noisy) {
  return Model(params).apply_putt(enhanced, noisy);
}

}  // namespace puttlab::nets
