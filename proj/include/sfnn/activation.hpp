#pragma once

#include <string_view>

#include "sfnn/matrix.hpp"

namespace sfnn {

// Hidden-unit non-linearity f. All three satisfy |f'| <= 1.
enum class ActivationKind { Sigmoid, ReLU, Tanh };

// Smooth function s used inside the expectation of a squash layer.
// Both kinds satisfy |s''| <= 1 and s'(0) > 0.
enum class SquashKind { Sigmoid, Tanh };

struct SquashConstants {
  double s0;   // s(0)
  double sp0;  // s'(0)
};

double sigmoid(double x);

double activate(ActivationKind kind, double x);
// Derivative with respect to the pre-activation. ReLU'(0) is taken as 0.
double activate_derivative(ActivationKind kind, double x);
// True when f(x) >= 0 for every x.
bool is_non_negative(ActivationKind kind);

Matrix activation_apply(ActivationKind kind, const Matrix& x);
Matrix activation_derivative(ActivationKind kind, const Matrix& x);

double squash(SquashKind kind, double x);
double squash_derivative(SquashKind kind, double x);
double squash_second_derivative(SquashKind kind, double x);
SquashConstants squash_constants(SquashKind kind);

std::string_view to_string(ActivationKind kind);
std::string_view to_string(SquashKind kind);
ActivationKind parse_activation(std::string_view name);
SquashKind parse_squash(std::string_view name);

}  // namespace sfnn
