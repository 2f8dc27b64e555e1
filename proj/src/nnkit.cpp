#include "hoi/nnkit.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>

namespace hoi::nnkit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

std::string to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

std::string to_string(OutputHead h) {
  switch (h) {
    case OutputHead::kLinear: return "linear";
    case OutputHead::kGaussian: return "gaussian";
    case OutputHead::kTanhGaussian: return "tanh_gaussian";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation: " + s);
}

OutputHead head_from_string(const std::string& s) {
  if (s == "linear") return OutputHead::kLinear;
  if (s == "gaussian") return OutputHead::kGaussian;
  if (s == "tanh_gaussian") return OutputHead::kTanhGaussian;
  throw ConfigError("unknown output head: " + s);
}

int NetSpec::output_rows() const {
  return head == OutputHead::kLinear ? output_dim : 2 * output_dim;
}

int NetSpec::layer_count() const {
  return static_cast<int>(hidden_dims.size()) + 1;
}

int NetSpec::layer_in(int l) const {
  return l == 0 ? input_dim : hidden_dims[static_cast<std::size_t>(l) - 1];
}

int NetSpec::layer_out(int l) const {
  return l == static_cast<int>(hidden_dims.size()) ? output_rows()
                                                   : hidden_dims[l];
}

std::int64_t NetSpec::param_count() const {
  std::int64_t n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += static_cast<std::int64_t>(layer_in(l)) * layer_out(l) + layer_out(l);
  return n;
}

void NetSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw ConfigError("NetSpec: dims must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("NetSpec: hidden dims must be >= 1");
}

bool NetSpec::operator==(const NetSpec& other) const {
  return input_dim == other.input_dim && hidden_dims == other.hidden_dims &&
         output_dim == other.output_dim && activation == other.activation &&
         head == other.head;
}

void ParamSet::zero_grads() { std::fill(grads.begin(), grads.end(), 0.0); }

void ParamSet::check_finite(const std::string& what) const {
  if (!all_finite(values))
    throw NumericalFault("non-finite parameter detected in " + what);
}

static std::vector<LayerLayout> build_layout(const NetSpec& spec) {
  std::vector<LayerLayout> layout;
  std::int64_t off = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    LayerLayout ll;
    ll.in = spec.layer_in(l);
    ll.out = spec.layer_out(l);
    ll.w_offset = off;
    off += static_cast<std::int64_t>(ll.in) * ll.out;
    ll.b_offset = off;
    off += ll.out;
    layout.push_back(ll);
  }
  return layout;
}

ParamSet make_params(const NetSpec& spec) {
  spec.validate();
  ParamSet p;
  p.layout = build_layout(spec);
  p.values.assign(static_cast<std::size_t>(spec.param_count()), 0.0);
  p.grads.assign(p.values.size(), 0.0);
  return p;
}

ParamSet make_params(const NetSpec& spec, Rng& rng) {
  ParamSet p = make_params(spec);
  for (const auto& ll : p.layout) {
    double a = std::sqrt(6.0 / (ll.in + ll.out));
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(ll.in) * ll.out; ++i)
      p.values[static_cast<std::size_t>(ll.w_offset + i)] = rng.uniform(-a, a);
    // biases stay zero
  }
  p.revision = 1;
  return p;
}

void set_log_std_bias(const NetSpec& spec, ParamSet& params, double value) {
  if (spec.head == OutputHead::kLinear)
    throw ContractError("set_log_std_bias: net has no gaussian head");
  const LayerLayout& last = params.layout.back();
  for (int r = spec.output_dim; r < 2 * spec.output_dim; ++r)
    params.values[static_cast<std::size_t>(last.b_offset + r)] = value;
  params.revision++;
}

using WMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                            Eigen::Dynamic, Eigen::RowMajor>>;
using WMapMut = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using BMap = Eigen::Map<const VectorXd>;
using BMapMut = Eigen::Map<VectorXd>;

const MatrixXd& net_forward(const NetSpec& spec, const ParamSet& params,
                            const MatrixXd& input, ForwardCache& cache) {
  spec.validate();
  if (input.rows() != spec.input_dim)
    throw ConfigError("net_forward: input has " + std::to_string(input.rows()) +
                      " rows, spec expects " + std::to_string(spec.input_dim));
  if (static_cast<std::int64_t>(params.values.size()) != spec.param_count())
    throw ConfigError("net_forward: params not sized for spec");

  const int L = spec.layer_count();
  cache.input = input;
  cache.pre.resize(static_cast<std::size_t>(L));
  cache.act.resize(static_cast<std::size_t>(L - 1));

  const MatrixXd* x = &cache.input;
  for (int l = 0; l < L; ++l) {
    const LayerLayout& ll = params.layout[static_cast<std::size_t>(l)];
    WMap w(params.values.data() + ll.w_offset, ll.out, ll.in);
    BMap b(params.values.data() + ll.b_offset, ll.out);
    MatrixXd& z = cache.pre[static_cast<std::size_t>(l)];
    z.noalias() = w * (*x);
    z.colwise() += b;
    if (l < L - 1) {
      MatrixXd& a = cache.act[static_cast<std::size_t>(l)];
      if (spec.activation == Activation::kTanh)
        a = z.array().tanh();
      else
        a = z.array().max(0.0);
      x = &a;
    }
  }

  cache.raw_out = cache.pre.back();
  cache.out = cache.raw_out;
  if (spec.head != OutputHead::kLinear) {
    // clamp log-std rows
    for (int r = spec.output_dim; r < 2 * spec.output_dim; ++r)
      for (int c = 0; c < cache.out.cols(); ++c)
        cache.out(r, c) =
            std::clamp(cache.out(r, c), kLogStdMin, kLogStdMax);
  }
  cache.revision = params.revision;
  cache.valid = true;
  return cache.out;
}

VectorXd net_forward(const NetSpec& spec, const ParamSet& params,
                     const VectorXd& input) {
  ForwardCache cache;
  return net_forward(spec, params, MatrixXd(input), cache).col(0);
}

MatrixXd net_backward(const NetSpec& spec, ParamSet& params,
                      const ForwardCache& cache, const MatrixXd& out_grad) {
  if (!cache.valid || cache.revision != params.revision)
    throw ContractError(
        "net_backward: forward cache is stale for these parameters");
  if (out_grad.rows() != spec.output_rows() ||
      out_grad.cols() != cache.input.cols())
    throw ConfigError("net_backward: out_grad shape mismatch");

  const int L = spec.layer_count();
  params.zero_grads();

  // Gradient w.r.t. the raw output: pass through where the log-std clamp is
  // inactive, zero where it saturated.
  MatrixXd delta = out_grad;
  if (spec.head != OutputHead::kLinear) {
    for (int r = spec.output_dim; r < 2 * spec.output_dim; ++r)
      for (int c = 0; c < delta.cols(); ++c) {
        double raw = cache.raw_out(r, c);
        if (raw <= kLogStdMin || raw >= kLogStdMax) delta(r, c) = 0.0;
      }
  }

  MatrixXd input_grad;
  for (int l = L - 1; l >= 0; --l) {
    const LayerLayout& ll = params.layout[static_cast<std::size_t>(l)];
    const MatrixXd& layer_in =
        l == 0 ? cache.input : cache.act[static_cast<std::size_t>(l) - 1];
    WMap w(params.values.data() + ll.w_offset, ll.out, ll.in);
    WMapMut dw(params.grads.data() + ll.w_offset, ll.out, ll.in);
    BMapMut db(params.grads.data() + ll.b_offset, ll.out);

    dw.noalias() = delta * layer_in.transpose();
    db = delta.rowwise().sum();

    MatrixXd upstream;
    upstream.noalias() = w.transpose() * delta;
    if (l == 0) {
      input_grad = std::move(upstream);
    } else {
      const MatrixXd& a = cache.act[static_cast<std::size_t>(l) - 1];
      if (spec.activation == Activation::kTanh)
        delta = upstream.array() * (1.0 - a.array().square());
      else
        delta = upstream.array() * (a.array() > 0.0).cast<double>();
    }
  }
  return input_grad;
}

OptState make_opt(const ParamSet& params, double lr) {
  OptState o;
  o.m.assign(params.values.size(), 0.0);
  o.v.assign(params.values.size(), 0.0);
  o.lr = lr;
  return o;
}

void opt_step(ParamSet& params, const std::vector<double>& grads, OptState& opt) {
  if (grads.size() != params.values.size() || opt.m.size() != grads.size())
    throw ContractError("opt_step: shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw NumericalFault("opt_step: non-finite gradient at index " +
                           std::to_string(i) + " (value " +
                           fmt_double(grads[i]) + ", step " +
                           std::to_string(opt.step) + ")");
  }
  opt.step++;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grads[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grads[i] * grads[i];
    double mhat = opt.m[i] / c1;
    double vhat = opt.v[i] / c2;
    params.values[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
  params.revision++;
}

static GradCheckReport compare_to_fd(const NetSpec& spec, ParamSet work,
                                     const VectorXd& input,
                                     const std::vector<double>& analytic,
                                     double tol, double h) {
  GradCheckReport report;
  ForwardCache cache;
  for (std::size_t i = 0; i < work.values.size(); ++i) {
    double saved = work.values[i];
    work.values[i] = saved + h;
    work.revision++;
    double fp = net_forward(spec, work, MatrixXd(input), cache).sum();
    work.values[i] = saved - h;
    work.revision++;
    double fm = net_forward(spec, work, MatrixXd(input), cache).sum();
    work.values[i] = saved;
    work.revision++;
    double fd = (fp - fm) / (2.0 * h);
    double a = analytic[i];
    double rel = std::abs(a - fd) / std::max(1e-4, std::abs(a) + std::abs(fd));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = static_cast<std::int64_t>(i);
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

GradCheckReport grad_check(const NetSpec& spec, const ParamSet& params,
                           const VectorXd& input, double tol, double h) {
  if (!all_finite(params.values))
    throw NumericalFault("grad_check: non-finite parameters");
  ParamSet work = params;
  ForwardCache cache;
  MatrixXd out = net_forward(spec, work, MatrixXd(input), cache);
  MatrixXd ones = MatrixXd::Ones(out.rows(), out.cols());
  net_backward(spec, work, cache, ones);
  return compare_to_fd(spec, work, input, work.grads, tol, h);
}

GradCheckReport grad_check_against(const NetSpec& spec, const ParamSet& params,
                                   const VectorXd& input,
                                   const std::vector<double>& analytic,
                                   double tol, double h) {
  return compare_to_fd(spec, params, input, analytic, tol, h);
}

HeadView split_head(const NetSpec& spec, const VectorXd& out) {
  if (spec.head == OutputHead::kLinear)
    throw ContractError("split_head: linear head has no mean/log-std split");
  HeadView v;
  v.mean = out.head(spec.output_dim);
  v.log_std = out.tail(spec.output_dim);
  return v;
}

static double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_one_minus_tanh_sq(double z) {
  // log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2z))
  return 2.0 * (std::log(2.0) - z - softplus(-2.0 * z));
}

static constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

GaussianSample sample_head(OutputHead head, const VectorXd& mean,
                           const VectorXd& log_std, Rng& rng) {
  if (head == OutputHead::kLinear)
    throw ContractError("sample_head: linear head is not a distribution");
  GaussianSample s;
  const auto n = mean.size();
  s.pre_tanh.resize(n);
  s.action.resize(n);
  double logp = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double std = std::exp(log_std[i]);
    double xi = rng.normal();
    double z = mean[i] + std * xi;
    s.pre_tanh[i] = z;
    logp += -0.5 * xi * xi - log_std[i] - kHalfLog2Pi;
    if (head == OutputHead::kTanhGaussian) {
      s.action[i] = std::tanh(z);
      logp -= log_one_minus_tanh_sq(z);
    } else {
      s.action[i] = z;
    }
  }
  s.log_prob = logp;
  return s;
}

double log_prob_head(OutputHead head, const VectorXd& mean,
                     const VectorXd& log_std, const VectorXd& pre_tanh) {
  if (head == OutputHead::kLinear)
    throw ContractError("log_prob_head: linear head is not a distribution");
  double logp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    double std = std::exp(log_std[i]);
    double xi = (pre_tanh[i] - mean[i]) / std;
    logp += -0.5 * xi * xi - log_std[i] - kHalfLog2Pi;
    if (head == OutputHead::kTanhGaussian)
      logp -= log_one_minus_tanh_sq(pre_tanh[i]);
  }
  return logp;
}

VectorXd mean_action(OutputHead head, const VectorXd& mean) {
  if (head == OutputHead::kTanhGaussian) return mean.array().tanh();
  return mean;
}

// ---------------------------------------------------------------- checkpoints

namespace {

void put_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, 4, 1, f); }
void put_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, 8, 1, f); }
std::uint32_t get_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, 4, 1, f) != 1) throw ParseError("checkpoint: truncated");
  return v;
}
std::uint64_t get_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, 8, 1, f) != 1) throw ParseError("checkpoint: truncated");
  return v;
}

}  // namespace

void save_net(const std::string& path, const NetSpec& spec,
              const ParamSet& params) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw HoiError("cannot write checkpoint: " + path);
  std::fwrite("IRNK", 1, 4, f);
  put_u32(f, 1);  // version
  std::uint8_t act = spec.activation == Activation::kTanh ? 0 : 1;
  std::uint8_t head = spec.head == OutputHead::kLinear      ? 0
                      : spec.head == OutputHead::kGaussian ? 1
                                                            : 2;
  std::fwrite(&act, 1, 1, f);
  std::fwrite(&head, 1, 1, f);
  put_u32(f, static_cast<std::uint32_t>(spec.input_dim));
  put_u32(f, static_cast<std::uint32_t>(spec.output_dim));
  put_u32(f, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int hdim : spec.hidden_dims) put_u32(f, static_cast<std::uint32_t>(hdim));
  put_u64(f, params.values.size());
  std::fwrite(params.values.data(), 8, params.values.size(), f);
  std::fclose(f);
}

void load_net(const std::string& path, NetSpec& spec, ParamSet& params) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw HoiError("cannot read checkpoint: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "IRNK", 4) != 0) {
    std::fclose(f);
    throw ParseError("checkpoint: bad magic in " + path);
  }
  std::uint32_t version = get_u32(f);
  if (version != 1) {
    std::fclose(f);
    throw ParseError("checkpoint: unsupported version " +
                     std::to_string(version));
  }
  std::uint8_t act = 0, head = 0;
  if (std::fread(&act, 1, 1, f) != 1 || std::fread(&head, 1, 1, f) != 1) {
    std::fclose(f);
    throw ParseError("checkpoint: truncated header");
  }
  spec.activation = act == 0 ? Activation::kTanh : Activation::kRelu;
  spec.head = head == 0   ? OutputHead::kLinear
              : head == 1 ? OutputHead::kGaussian
                          : OutputHead::kTanhGaussian;
  spec.input_dim = static_cast<int>(get_u32(f));
  spec.output_dim = static_cast<int>(get_u32(f));
  std::uint32_t n_hidden = get_u32(f);
  spec.hidden_dims.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    spec.hidden_dims.push_back(static_cast<int>(get_u32(f)));
  std::uint64_t count = get_u64(f);
  if (count != static_cast<std::uint64_t>(spec.param_count())) {
    std::fclose(f);
    throw ParseError("checkpoint: parameter count " + std::to_string(count) +
                     " does not match spec (" +
                     std::to_string(spec.param_count()) + ") in " + path);
  }
  params = make_params(spec);
  if (std::fread(params.values.data(), 8, count, f) != count) {
    std::fclose(f);
    throw ParseError("checkpoint: truncated parameter array in " + path);
  }
  std::fclose(f);
  params.revision = 1;
  params.check_finite("checkpoint " + path);
}

}  // namespace hoi::nnkit
