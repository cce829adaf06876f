#include "gdmstack/nn.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gdmstack {

namespace {

constexpr std::string_view kFormatTag = "gdmstack-densenet";
constexpr int kFormatVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd activate(Activation activation, const Eigen::MatrixXd& pre) {
  switch (activation) {
    case Activation::identity:
      return pre;
    case Activation::tanh:
      return pre.array().tanh().matrix();
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::swish:
      return pre.unaryExpr([](double x) { return x * sigmoid(x); });
  }
  return pre;
}

// d(activation)/d(pre), using the cached output where it is cheaper.
Eigen::MatrixXd activation_slope(Activation activation, const Eigen::MatrixXd& pre,
                                 const Eigen::MatrixXd& out) {
  switch (activation) {
    case Activation::identity:
      return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    case Activation::tanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::relu:
      return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::swish:
      return pre.unaryExpr([](double x) {
        double s = sigmoid(x);
        return s + x * s * (1.0 - s);
      });
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "swish") return Activation::swish;
  throw std::invalid_argument(fmt::format("unknown activation '{}'", name));
}

DenseNet::DenseNet(std::vector<int> widths, std::vector<Activation> activations,
                   Rng& rng)
    : widths_(std::move(widths)), activations_(std::move(activations)) {
  check_layout();
  for (int k = 0; k < layer_count(); ++k) {
    double bound = 1.0 / std::sqrt(static_cast<double>(widths_[k]));
    auto w = weight(k);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    auto b = bias(k);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }
}

DenseNet::DenseNet(std::vector<int> widths, std::vector<Activation> activations,
                   Eigen::VectorXd params)
    : widths_(std::move(widths)), activations_(std::move(activations)) {
  check_layout();
  if (params.size() != params_.size())
    throw std::invalid_argument(fmt::format(
        "parameter vector has {} entries, layout needs {}", params.size(),
        params_.size()));
  if (!params.allFinite()) throw std::invalid_argument("parameters must be finite");
  params_ = std::move(params);
}

void DenseNet::check_layout() {
  if (widths_.size() < 2)
    throw std::invalid_argument("a network needs at least two widths");
  if (activations_.size() != widths_.size() - 1)
    throw std::invalid_argument("need one activation per layer");
  for (int w : widths_)
    if (w < 1) throw std::invalid_argument("layer widths must be positive");
  offsets_.assign(1, 0);
  for (int k = 0; k < layer_count(); ++k)
    offsets_.push_back(offsets_.back() +
                       static_cast<std::ptrdiff_t>(widths_[k + 1]) * (widths_[k] + 1));
  params_ = Eigen::VectorXd::Zero(offsets_.back());
}

Eigen::Map<const Eigen::MatrixXd> DenseNet::weight(int layer) const {
  return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<const Eigen::VectorXd> DenseNet::bias(int layer) const {
  return {params_.data() + offsets_[layer] +
              static_cast<std::ptrdiff_t>(widths_[layer + 1]) * widths_[layer],
          widths_[layer + 1]};
}
Eigen::Map<Eigen::MatrixXd> DenseNet::weight(int layer) {
  return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<Eigen::VectorXd> DenseNet::bias(int layer) {
  return {params_.data() + offsets_[layer] +
              static_cast<std::ptrdiff_t>(widths_[layer + 1]) * widths_[layer],
          widths_[layer + 1]};
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& inputs,
                                  ForwardCache* cache) const {
  if (inputs.rows() != input_width())
    throw std::invalid_argument(fmt::format(
        "network expects {} input rows, got {}", input_width(), inputs.rows()));
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd x = inputs;
  for (int k = 0; k < layer_count(); ++k) {
    Eigen::MatrixXd pre = weight(k) * x;
    pre.colwise() += bias(k);
    Eigen::MatrixXd out = activate(activations_[k], pre);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(pre));
      cache->outputs.push_back(out);
    }
    x = std::move(out);
  }
  return x;
}

NetGradients DenseNet::backward(const ForwardCache& cache,
                                const Eigen::MatrixXd& upstream) const {
  if (static_cast<int>(cache.inputs.size()) != layer_count())
    throw std::invalid_argument("forward cache does not match this network");
  const Eigen::Index batch = cache.inputs.front().cols();
  if (upstream.rows() != output_width() || upstream.cols() != batch)
    throw std::invalid_argument(fmt::format(
        "upstream gradient is {}x{}, expected {}x{}", upstream.rows(),
        upstream.cols(), output_width(), batch));

  NetGradients grads;
  grads.params = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = upstream;
  for (int k = layer_count() - 1; k >= 0; --k) {
    delta = delta.cwiseProduct(
        activation_slope(activations_[k], cache.pre[k], cache.outputs[k]));
    Eigen::Map<Eigen::MatrixXd> gw(grads.params.data() + offsets_[k],
                                   widths_[k + 1], widths_[k]);
    Eigen::Map<Eigen::VectorXd> gb(
        grads.params.data() + offsets_[k] +
            static_cast<std::ptrdiff_t>(widths_[k + 1]) * widths_[k],
        widths_[k + 1]);
    gw.noalias() = delta * cache.inputs[k].transpose();
    gb = delta.rowwise().sum();
    delta = weight(k).transpose() * delta;
  }
  grads.inputs = std::move(delta);
  return grads;
}

Adam::Adam(std::size_t size, AdamConfig config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {
  if (!(config_.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be > 0");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0)
    throw std::invalid_argument("Adam decay constants must lie in [0, 1)");
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument(fmt::format(
        "optimizer holds {} moments, got {} params and {} grads", m_.size(),
        params.size(), grads.size()));
  if (!grads.allFinite())
    throw std::domain_error("non-finite gradient passed to the optimizer");

  Eigen::VectorXd g = grads;
  if (config_.max_grad_norm > 0.0) {
    double norm = g.norm();
    if (norm > config_.max_grad_norm) g *= config_.max_grad_norm / norm;
  }
  ++steps_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * g;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * g.cwiseProduct(g);
  double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  params.array() -= config_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + config_.epsilon);
}

void save(const DenseNet& net, std::ostream& out) {
  out << kFormatTag << ' ' << kFormatVersion << '\n';
  out << "widths";
  for (int w : net.widths()) out << ' ' << w;
  out << "\nactivations";
  for (auto a : net.activations()) out << ' ' << to_string(a);
  out << "\nparams " << net.param_count() << '\n';
  for (double p : net.params()) out << fmt::format("{}\n", p);
  if (!out) throw std::runtime_error("failed to write network parameters");
}

DenseNet load_dense_net(std::istream& in) {
  auto fail = [](const std::string& what) {
    return std::runtime_error("malformed network file: " + what);
  };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != kFormatTag) throw fail("missing header");
  if (version != kFormatVersion)
    throw fail(fmt::format("unsupported version {}", version));

  std::string line;
  std::getline(in, line);
  std::vector<int> widths;
  std::vector<Activation> activations;
  std::string key;
  if (!(in >> key) || key != "widths") throw fail("expected widths");
  std::getline(in, line);
  {
    std::istringstream row(line);
    for (int w; row >> w;) widths.push_back(w);
  }
  if (!(in >> key) || key != "activations") throw fail("expected activations");
  std::getline(in, line);
  {
    std::istringstream row(line);
    for (std::string a; row >> a;) activations.push_back(parse_activation(a));
  }
  std::size_t count = 0;
  if (!(in >> key >> count) || key != "params") throw fail("expected params");
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i)
    if (!(in >> params[static_cast<Eigen::Index>(i)])) throw fail("truncated parameters");
  return DenseNet(std::move(widths), std::move(activations), std::move(params));
}

void save(const DenseNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(net, out);
}

DenseNet load_dense_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_dense_net(in);
}

GradCheckResult finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& loss,
    const Eigen::VectorXd& point, const Eigen::VectorXd& analytic, double step,
    double floor) {
  if (point.size() != analytic.size())
    throw std::invalid_argument("gradient and point sizes differ");
  GradCheckResult result;
  Eigen::VectorXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    double up = loss(probe);
    probe[i] = point[i] - step;
    double down = loss(probe);
    probe[i] = point[i];
    double numeric = (up - down) / (2.0 * step);
    double abs_err = std::abs(numeric - analytic[i]);
    double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    double rel_err = abs_err / denom;
    if (rel_err > result.max_relative_error) {
      result.max_relative_error = rel_err;
      result.worst_index = static_cast<std::size_t>(i);
    }
    result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
    ++result.checked;
  }
  return result;
}

}  // namespace gdmstack
