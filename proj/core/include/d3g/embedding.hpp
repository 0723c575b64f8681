#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "d3g/errors.hpp"

namespace d3g {

// Norms below this are treated as zero vectors.
inline constexpr double kZeroNormEps = 1e-12;

// Fixed-dimension real vector, the unit of all similarity computation.
// Components are stored as doubles so the 0.01-grid weight scan is
// deterministic across platforms.
struct Embedding {
    std::vector<double> values;

    Embedding() = default;
    explicit Embedding(std::vector<double> v) : values(std::move(v)) {}
    Embedding(std::initializer_list<double> v) : values(v) {}

    size_t dim() const { return values.size(); }
    double& operator[](size_t i) { return values[i]; }
    double operator[](size_t i) const { return values[i]; }

    bool operator==(const Embedding& other) const = default;

    // Throws DimMismatch on empty vectors or non-finite components.
    void validate(const std::string& context) const;
};

// Scalar mixing coefficient between a class's text embedding (weight w)
// and its generated-image embedding average (weight 1-w).
class FusionWeight {
public:
    explicit FusionWeight(double w);

    // Grid point k/100 for integer k in [0, 100], the scanner's domain.
    static FusionWeight from_grid(int k);

    double text() const { return w_; }
    double image() const { return 1.0 - w_; }

    bool operator==(const FusionWeight& other) const = default;

private:
    double w_;
};

double l2_norm(const Embedding& v);

// Unit vector parallel to v. Throws ZeroVector when ||v|| <= 1e-12.
Embedding l2_normalize(const Embedding& v);

// Cosine similarity in [-1, 1]. Symmetric and invariant to positive
// rescaling of either argument. Throws DimMismatch / ZeroVector.
double cosine(const Embedding& a, const Embedding& b);

// Componentwise arithmetic mean. Throws EmptyInput / DimMismatch.
Embedding mean_embedding(std::span<const Embedding> vs);

// w * normalize(text_part) + (1-w) * normalize(image_part).
// Both operands are L2-normalized before the weighted sum so the weight is
// comparable across classes; the result is deliberately NOT re-normalized
// (cosine scoring downstream is scale-invariant).
Embedding fuse(const Embedding& text_part, const Embedding& image_part, FusionWeight w);

}  // namespace d3g
