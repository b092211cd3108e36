#include "physlab/neural.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace physlab::neural {

namespace {

double softplus(double z) {
  // Overflow-safe: max(z,0) + log1p(exp(-|z|)).
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus_c_sigma() {
  // 1 / E[softplus(x)^2], computed once by high-order quadrature.
  static const double value = [] {
    double second = gauss_hermite_1d([](double x) {
      double s = softplus(x);
      return s * s;
    }, 120);
    return 1.0 / second;
  }();
  return value;
}

Mat softmax_columns(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    Vec col = z.col(j);
    double m = col.maxCoeff();
    Vec e = (col.array() - m).exp();
    out.col(j) = e / e.sum();
  }
  return out;
}

}  // namespace

Activation Activation::make(Act tag) {
  switch (tag) {
    case Act::relu:
      return {tag, 2.0};
    case Act::linear:
      return {tag, 1.0};
    case Act::softplus:
      return {tag, softplus_c_sigma()};
    case Act::softmax:
      return {tag, 1.0};
  }
  throw std::invalid_argument("Activation::make: unknown tag");
}

Activation Activation::from_name(const std::string& name) {
  if (name == "softplus") return make(Act::softplus);
  if (name == "relu") return make(Act::relu);
  if (name == "linear") return make(Act::linear);
  if (name == "softmax") return make(Act::softmax);
  throw std::invalid_argument("Activation::from_name: unknown activation '" + name + "'");
}

const char* Activation::name() const {
  switch (tag) {
    case Act::softplus:
      return "softplus";
    case Act::relu:
      return "relu";
    case Act::linear:
      return "linear";
    case Act::softmax:
      return "softmax";
  }
  return "?";
}

double act_value(Act tag, double z) {
  switch (tag) {
    case Act::softplus:
      return softplus(z);
    case Act::relu:
      return z > 0.0 ? z : 0.0;
    case Act::linear:
      return z;
    case Act::softmax:
      throw std::invalid_argument("act_value: softmax is not elementwise");
  }
  return 0.0;
}

double act_deriv(Act tag, double z) {
  switch (tag) {
    case Act::softplus:
      return sigmoid(z);
    case Act::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Act::linear:
      return 1.0;
    case Act::softmax:
      throw std::invalid_argument("act_deriv: softmax is not elementwise");
  }
  return 0.0;
}

void Network::validate() const {
  if (widths.size() != weights.size() + 1)
    throw std::invalid_argument("network: widths/weights size mismatch");
  if (activations.size() != weights.size())
    throw std::invalid_argument("network: activations/weights size mismatch");
  for (std::size_t h = 0; h < weights.size(); ++h) {
    if (weights[h].rows() != widths[h + 1] || weights[h].cols() != widths[h])
      throw std::invalid_argument("network: weight " + std::to_string(h) + " has wrong shape");
  }
}

Network init(const std::vector<int>& widths, const std::vector<Activation>& activations,
             Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("init: need at least one layer");
  if (activations.size() != widths.size() - 1)
    throw std::invalid_argument("init: need one activation per layer");
  Network net;
  net.widths = widths;
  net.activations = activations;
  net.weights.reserve(widths.size() - 1);
  for (std::size_t h = 0; h + 1 < widths.size(); ++h)
    net.weights.push_back(rng.normal_mat(widths[h + 1], widths[h]));
  net.validate();
  return net;
}

Forward forward(const Network& net, const Mat& x) {
  net.validate();
  if (x.rows() != net.widths.front())
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(net.widths.front()));
  Forward fwd;
  fwd.activations.reserve(net.depth() + 1);
  fwd.preactivations.reserve(net.depth());
  fwd.activations.push_back(x);
  for (int h = 0; h < net.depth(); ++h) {
    const Activation& act = net.activations[h];
    Mat pre = net.weights[h] * fwd.activations.back();
    Mat out;
    if (act.tag == Act::softmax) {
      out = softmax_columns(pre);
    } else {
      double scale = std::sqrt(act.c_sigma / net.widths[h + 1]);
      out = scale * pre.unaryExpr([&](double z) { return act_value(act.tag, z); });
    }
    if (!all_finite(out))
      throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(h + 1));
    fwd.preactivations.push_back(std::move(pre));
    fwd.activations.push_back(std::move(out));
  }
  return fwd;
}

std::vector<Vec> forward_vec(const Network& net, const Vec& x) {
  Forward fwd = forward(net, x);
  std::vector<Vec> out;
  out.reserve(fwd.activations.size());
  for (const Mat& a : fwd.activations) out.push_back(a.col(0));
  return out;
}

double loss_value(const Loss& loss, const Mat& pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("loss_value: prediction/target shape mismatch");
  const double n = static_cast<double>(pred.cols());
  if (loss.tag == LossTag::square) return (pred - target).squaredNorm() / n;
  // Cross entropy wants probability-vector columns.
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    if (pred.col(j).minCoeff() < -1e-12 || std::abs(pred.col(j).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("loss_value: cross_entropy needs probability-vector columns");
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
      if (target(i, j) != 0.0) total -= target(i, j) * std::log(std::max(pred(i, j), 1e-300));
  return total / n;
}

Mat loss_output_grad(const Loss& loss, const Mat& pred, const Mat& target) {
  const double n = static_cast<double>(pred.cols());
  if (loss.tag == LossTag::square) return 2.0 * (pred - target) / n;
  Mat grad(pred.rows(), pred.cols());
  for (Eigen::Index j = 0; j < pred.cols(); ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
      grad(i, j) = target(i, j) == 0.0 ? 0.0 : -target(i, j) / std::max(pred(i, j), 1e-300) / n;
  return grad;
}

namespace {

// Core chain: `delta` is dL/d x^(H) unless `delta_is_last_dpre`, in which
// case it is already the gradient at the last preactivation (cross-entropy
// plus softmax collapses there).
Backward backprop(const Network& net, const Forward& fwd, Mat delta, bool delta_is_last_dpre) {
  Backward back;
  back.weight_grads.resize(net.depth());
  for (int h = net.depth() - 1; h >= 0; --h) {
    const Activation& act = net.activations[h];
    const Mat& pre = fwd.preactivations[h];
    Mat dpre;
    if (h == net.depth() - 1 && delta_is_last_dpre) {
      dpre = std::move(delta);
    } else if (act.tag == Act::softmax) {
      // dL/du = p (.) (delta - <p, delta> 1) per column.
      const Mat& p = fwd.activations[h + 1];
      dpre.resize(pre.rows(), pre.cols());
      for (Eigen::Index j = 0; j < pre.cols(); ++j) {
        double dot = p.col(j).dot(delta.col(j));
        dpre.col(j) = p.col(j).cwiseProduct((delta.col(j).array() - dot).matrix());
      }
    } else {
      double scale = std::sqrt(act.c_sigma / net.widths[h + 1]);
      dpre = scale * pre.unaryExpr([&](double z) { return act_deriv(act.tag, z); })
                         .cwiseProduct(delta);
    }
    back.weight_grads[h] = dpre * fwd.activations[h].transpose();
    delta = net.weights[h].transpose() * dpre;
  }
  back.input_grad = std::move(delta);
  return back;
}

}  // namespace

Backward backward(const Network& net, const Forward& fwd, const Loss& loss, const Mat& target) {
  if (fwd.activations.size() != static_cast<std::size_t>(net.depth()) + 1)
    throw std::invalid_argument("backward: forward record does not match network");
  const Mat& pred = fwd.activations.back();
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("backward: prediction/target shape mismatch");
  if (loss.tag == LossTag::cross_entropy && net.activations.back().tag == Act::softmax) {
    double n = static_cast<double>(pred.cols());
    return backprop(net, fwd, (pred - target) / n, true);
  }
  return backprop(net, fwd, loss_output_grad(loss, pred, target), false);
}

Backward backward_from_output(const Network& net, const Forward& fwd, const Mat& output_grad) {
  if (output_grad.rows() != net.widths.back())
    throw std::invalid_argument("backward_from_output: gradient row count mismatch");
  return backprop(net, fwd, output_grad, false);
}

void sgd_step(Network& net, const std::vector<Mat>& grads, double eta) {
  if (grads.size() != net.weights.size())
    throw std::invalid_argument("sgd_step: gradient count mismatch");
  for (std::size_t h = 0; h < grads.size(); ++h) {
    if (grads[h].rows() != net.weights[h].rows() || grads[h].cols() != net.weights[h].cols())
      throw std::invalid_argument("sgd_step: gradient " + std::to_string(h) + " shape mismatch");
    net.weights[h] -= eta * grads[h];
  }
}

std::vector<double> frobenius_norms(const Network& net) {
  std::vector<double> out;
  out.reserve(net.weights.size());
  for (const Mat& w : net.weights) out.push_back(w.norm());
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_json(const Network& net) {
  // Emitted by hand so weights carry exactly 17 significant digits.
  std::ostringstream os;
  os << "{\"widths\":[";
  for (std::size_t i = 0; i < net.widths.size(); ++i) {
    if (i) os << ',';
    os << net.widths[i];
  }
  os << "],\"activations\":[";
  for (std::size_t i = 0; i < net.activations.size(); ++i) {
    if (i) os << ',';
    os << '"' << net.activations[i].name() << '"';
  }
  os << "],\"weights\":[";
  for (std::size_t h = 0; h < net.weights.size(); ++h) {
    if (h) os << ',';
    os << '[';
    for (Eigen::Index i = 0; i < net.weights[h].rows(); ++i) {
      if (i) os << ',';
      os << '[';
      for (Eigen::Index j = 0; j < net.weights[h].cols(); ++j) {
        if (j) os << ',';
        os << fmt17(net.weights[h](i, j));
      }
      os << ']';
    }
    os << ']';
  }
  os << "]}";
  return os.str();
}

Network from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Network net;
  net.widths = j.at("widths").get<std::vector<int>>();
  for (const auto& name : j.at("activations"))
    net.activations.push_back(Activation::from_name(name.get<std::string>()));
  for (const auto& wj : j.at("weights")) {
    Mat w(wj.size(), wj.empty() ? 0 : wj[0].size());
    for (std::size_t i = 0; i < wj.size(); ++i)
      for (std::size_t k = 0; k < wj[i].size(); ++k) w(i, k) = wj[i][k].get<double>();
    net.weights.push_back(std::move(w));
  }
  net.validate();
  return net;
}

void save_json(const Network& net, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_json: cannot open " + path.string());
  f << to_json(net);
  if (!f) throw std::runtime_error("save_json: write failed for " + path.string());
}

Network load_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_json: cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace physlab::neural
