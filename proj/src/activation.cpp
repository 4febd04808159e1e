#include "sfnn/activation.hpp"

#include <cmath>
#include <string>

#include "sfnn/error.hpp"

namespace sfnn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::Sigmoid:
      return sigmoid(x);
    case ActivationKind::ReLU:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::Tanh:
      return std::tanh(x);
  }
  return 0.0;
}

double activate_derivative(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::ReLU:
      return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 0.0;
}

bool is_non_negative(ActivationKind kind) { return kind != ActivationKind::Tanh; }

Matrix activation_apply(ActivationKind kind, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.values()[i] = activate(kind, x.values()[i]);
  return out;
}

Matrix activation_derivative(ActivationKind kind, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.values()[i] = activate_derivative(kind, x.values()[i]);
  }
  return out;
}

double squash(SquashKind kind, double x) {
  return kind == SquashKind::Sigmoid ? sigmoid(x) : std::tanh(x);
}

double squash_derivative(SquashKind kind, double x) {
  if (kind == SquashKind::Sigmoid) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
  }
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

double squash_second_derivative(SquashKind kind, double x) {
  if (kind == SquashKind::Sigmoid) {
    const double s = sigmoid(x);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
  }
  const double t = std::tanh(x);
  return -2.0 * t * (1.0 - t * t);
}

SquashConstants squash_constants(SquashKind kind) {
  if (kind == SquashKind::Sigmoid) return {0.5, 0.25};
  return {0.0, 1.0};
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Sigmoid:
      return "sigmoid";
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::Tanh:
      return "tanh";
  }
  return "?";
}

std::string_view to_string(SquashKind kind) {
  return kind == SquashKind::Sigmoid ? "sigmoid" : "tanh";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "tanh") return ActivationKind::Tanh;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

SquashKind parse_squash(std::string_view name) {
  if (name == "sigmoid") return SquashKind::Sigmoid;
  if (name == "tanh") return SquashKind::Tanh;
  throw ValidationError("unknown squash function '" + std::string(name) + "'");
}

}  // namespace sfnn
