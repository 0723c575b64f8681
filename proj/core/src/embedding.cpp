#include "d3g/embedding.hpp"

#include <cmath>
#include <string>

namespace d3g {

void Embedding::validate(const std::string& context) const {
    if (values.empty()) {
        throw DimMismatchError(context + ": empty embedding");
    }
    for (double x : values) {
        if (!std::isfinite(x)) {
            throw DimMismatchError(context + ": non-finite component");
        }
    }
}

FusionWeight::FusionWeight(double w) : w_(w) {
    if (!(w >= 0.0 && w <= 1.0)) {
        throw InvalidConfigError("fusion weight must lie in [0,1], got " + std::to_string(w));
    }
}

FusionWeight FusionWeight::from_grid(int k) {
    if (k < 0 || k > 100) {
        throw InvalidConfigError("fusion weight grid index must lie in [0,100], got " +
                                 std::to_string(k));
    }
    return FusionWeight(static_cast<double>(k) / 100.0);
}

double l2_norm(const Embedding& v) {
    double sum = 0.0;
    for (double x : v.values) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

Embedding l2_normalize(const Embedding& v) {
    const double n = l2_norm(v);
    if (n <= kZeroNormEps) {
        throw ZeroVectorError();
    }
    Embedding out;
    out.values.reserve(v.dim());
    for (double x : v.values) {
        out.values.push_back(x / n);
    }
    return out;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw DimMismatchError("cosine: dim " + std::to_string(a.dim()) + " vs " +
                               std::to_string(b.dim()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < a.dim(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na <= kZeroNormEps || nb <= kZeroNormEps) {
        throw ZeroVectorError("cosine: zero-norm operand");
    }
    return dot / (na * nb);
}

Embedding mean_embedding(std::span<const Embedding> vs) {
    if (vs.empty()) {
        throw EmptyInputError("mean_embedding: empty list");
    }
    const size_t d = vs.front().dim();
    Embedding out(std::vector<double>(d, 0.0));
    for (const Embedding& v : vs) {
        if (v.dim() != d) {
            throw DimMismatchError("mean_embedding: dim " + std::to_string(v.dim()) +
                                   " vs " + std::to_string(d));
        }
        for (size_t i = 0; i < d; ++i) {
            out[i] += v[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(vs.size());
    for (size_t i = 0; i < d; ++i) {
        out[i] *= inv;
    }
    return out;
}

Embedding fuse(const Embedding& text_part, const Embedding& image_part, FusionWeight w) {
    if (text_part.dim() != image_part.dim()) {
        throw DimMismatchError("fuse: dim " + std::to_string(text_part.dim()) + " vs " +
                               std::to_string(image_part.dim()));
    }
    const Embedding t = l2_normalize(text_part);
    const Embedding i = l2_normalize(image_part);
    Embedding out;
    out.values.reserve(t.dim());
    for (size_t k = 0; k < t.dim(); ++k) {
        out.values.push_back(w.text() * t[k] + w.image() * i[k]);
    }
    return out;
}

}  // namespace d3g
