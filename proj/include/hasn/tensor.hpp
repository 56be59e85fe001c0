#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hasn {

// Thrown on any shape/precondition violation before data is touched.
class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t numel() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense NCHW tensor, contiguous row-major in (n,c,h,w) order.
template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;
    TensorT(int n, int c, int h, int w) : shape{n, c, h, w} {
        if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw TensorError("non-positive tensor dimension " + shape.str());
        data.assign(size_t(shape.numel()), T(0));
    }
    explicit TensorT(Shape s) : TensorT(s.n, s.c, s.h, s.w) {}

    int n() const { return shape.n; }
    int c() const { return shape.c; }
    int h() const { return shape.h; }
    int w() const { return shape.w; }
    std::int64_t numel() const { return shape.numel(); }
    bool empty() const { return data.empty(); }

    T& at(int in, int ic, int ih, int iw) {
        return data[size_t(((std::int64_t(in) * shape.c + ic) * shape.h + ih) * shape.w + iw)];
    }
    const T& at(int in, int ic, int ih, int iw) const {
        return data[size_t(((std::int64_t(in) * shape.c + ic) * shape.h + ih) * shape.w + iw)];
    }

    T* plane(int in, int ic) {
        return data.data() + size_t((std::int64_t(in) * shape.c + ic) * shape.h * shape.w);
    }
    const T* plane(int in, int ic) const {
        return data.data() + size_t((std::int64_t(in) * shape.c + ic) * shape.h * shape.w);
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }

    static TensorT full(Shape s, T v) {
        TensorT t(s);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static TensorT ones(Shape s) { return full(s, T(1)); }

    static TensorT uniform(Shape s, std::mt19937_64& rng, T lo = T(-1), T hi = T(1)) {
        TensorT t(s);
        std::uniform_real_distribution<double> dist{double(lo), double(hi)};
        for (auto& v : t.data) v = T(dist(rng));
        return t;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw TensorError(msg);
}

}  // namespace hasn
