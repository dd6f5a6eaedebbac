#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "saclab/field.hpp"
#include "saclab/spatial.hpp"

namespace saclab {

/// Bounded smooth functionals of the field used as Kolmogorov data and as
/// ergodic-average test functions:
///   cosine:      x -> cos((x, w)_H)
///   gauss-radial: x -> exp(-|x - x0|_H^2)
///   coordinate:  x -> R tanh((x, w)_H / R)   (smooth clamp of a coordinate)
class Observable {
public:
    enum class Kind { cosine, gauss_radial, coordinate };

    static Observable cosine(Field w) { return Observable(Kind::cosine, std::move(w), 1.0); }
    static Observable gauss_radial(Field x0) {
        return Observable(Kind::gauss_radial, std::move(x0), 1.0);
    }
    static Observable coordinate(Field w, double clamp = 2.0) {
        return Observable(Kind::coordinate, std::move(w), clamp);
    }

    double operator()(const SpatialModel& m, const Field& u) const {
        switch (kind_) {
            case Kind::cosine:
                return std::cos(m.inner_H(u, param_));
            case Kind::gauss_radial: {
                const Field d = u - param_;
                return std::exp(-m.field_norm_H_sq(d));
            }
            case Kind::coordinate:
            default:
                return clamp_ * std::tanh(m.inner_H(u, param_) / clamp_);
        }
    }

    /// |g|_oo, known in closed form for each kind.
    double sup_norm() const { return kind_ == Kind::coordinate ? clamp_ : 1.0; }

    Kind kind() const { return kind_; }
    const Field& parameter() const { return param_; }
    double clamp() const { return clamp_; }

    std::string kind_name() const {
        switch (kind_) {
            case Kind::cosine: return "cosine";
            case Kind::gauss_radial: return "gauss-radial";
            default: return "coordinate";
        }
    }

private:
    Observable(Kind k, Field p, double clamp) : kind_(k), param_(std::move(p)), clamp_(clamp) {
        if (kind_ == Kind::coordinate && !(clamp_ > 0.0))
            throw std::invalid_argument("Observable: clamp must be positive");
    }

    Kind kind_;
    Field param_;
    double clamp_;
};

} // namespace saclab
