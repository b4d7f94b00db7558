#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "diffroll/common.hpp"

namespace diffroll {

// Dense row-major matrix. Element type is templated so the same numeric code
// can run in float for speed and double for oracle-grade tests.
template <typename T>
struct mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    mat() = default;
    mat(int r, int c, T fill = T(0)) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    T* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
    const T* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }

    T& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    const T& at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    bool same_shape(const mat& o) const { return rows == o.rows && cols == o.cols; }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    template <typename U>
    mat<U> cast() const {
        mat<U> out(rows, cols);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using matf = mat<float>;
using matd = mat<double>;

// Batch of channel-major sequences, laid out [b][c][t] contiguously.
template <typename T>
struct batch3 {
    int b = 0, c = 0, t = 0;
    std::vector<T> v;

    batch3() = default;
    batch3(int b_, int c_, int t_, T fill = T(0))
        : b(b_), c(c_), t(t_), v(static_cast<size_t>(b_) * c_ * t_, fill) {}

    T* item(int bi) { return v.data() + static_cast<size_t>(bi) * c * t; }
    const T* item(int bi) const { return v.data() + static_cast<size_t>(bi) * c * t; }

    T* chan(int bi, int ci) { return item(bi) + static_cast<size_t>(ci) * t; }
    const T* chan(int bi, int ci) const { return item(bi) + static_cast<size_t>(ci) * t; }

    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    // Copies one item in/out as a matrix view.
    void set_item(int bi, const mat<T>& m) {
        check_shape(m.rows == c && m.cols == t, "batch3::set_item: shape mismatch");
        std::copy(m.v.begin(), m.v.end(), item(bi));
    }

    mat<T> get_item(int bi) const {
        mat<T> m(c, t);
        std::copy(item(bi), item(bi) + static_cast<size_t>(c) * t, m.v.begin());
        return m;
    }
};

using batch3f = batch3<float>;

}  // namespace diffroll
