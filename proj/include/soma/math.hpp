#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace soma {

// Dense row-major matrix of doubles. The workhorse value type for network
// features, score matrices and assignment matrices.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), data_(size_t(rows) * size_t(cols), 0.0) {
        assert(rows >= 0 && cols >= 0);
    }
    Mat(int rows, int cols, double fill)
        : rows_(rows), cols_(cols), data_(size_t(rows) * size_t(cols), fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(int r) { return data_.data() + size_t(r) * cols_; }
    const double* row(int r) const { return data_.data() + size_t(r) * cols_; }

    double& operator()(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[size_t(r) * cols_ + c];
    }
    double operator()(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[size_t(r) * cols_ + c];
    }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        if (n == 0.0) return {0.0, 0.0, 0.0};
        return {x / n, y / n, z / n};
    }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

// 3x3 rotation matrix, row-major.
struct Mat3 {
    double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    // Rodrigues formula for an axis-angle vector (angle = |aa|).
    static Mat3 from_axis_angle(const Vec3& aa) {
        double angle = aa.norm();
        if (angle < 1e-12) {
            // Second-order small-angle expansion keeps the map smooth near zero.
            Mat3 r;
            r.m[0] = 1;      r.m[1] = -aa.z;  r.m[2] = aa.y;
            r.m[3] = aa.z;   r.m[4] = 1;      r.m[5] = -aa.x;
            r.m[6] = -aa.y;  r.m[7] = aa.x;   r.m[8] = 1;
            return r;
        }
        Vec3 u = aa * (1.0 / angle);
        double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
        Mat3 r;
        r.m[0] = c + u.x * u.x * t;
        r.m[1] = u.x * u.y * t - u.z * s;
        r.m[2] = u.x * u.z * t + u.y * s;
        r.m[3] = u.y * u.x * t + u.z * s;
        r.m[4] = c + u.y * u.y * t;
        r.m[5] = u.y * u.z * t - u.x * s;
        r.m[6] = u.z * u.x * t - u.y * s;
        r.m[7] = u.z * u.y * t + u.x * s;
        r.m[8] = c + u.z * u.z * t;
        return r;
    }

    static Mat3 rotation_y(double angle) {
        double c = std::cos(angle), s = std::sin(angle);
        Mat3 r;
        r.m[0] = c;  r.m[1] = 0; r.m[2] = s;
        r.m[3] = 0;  r.m[4] = 1; r.m[5] = 0;
        r.m[6] = -s; r.m[7] = 0; r.m[8] = c;
        return r;
    }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
                r.m[i * 3 + j] = s;
            }
        return r;
    }

    // Inverse of a rotation.
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
        return r;
    }

    // Axis-angle vector of this rotation (inverse of from_axis_angle).
    Vec3 to_axis_angle() const {
        double tr = m[0] + m[4] + m[8];
        double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
        double angle = std::acos(c);
        if (angle < 1e-12) return {0, 0, 0};
        Vec3 axis{m[7] - m[5], m[2] - m[6], m[3] - m[1]};
        double s = axis.norm();
        if (s < 1e-9) {
            // angle near pi: recover axis from the diagonal
            double ax = std::sqrt(std::max(0.0, (m[0] + 1.0) * 0.5));
            double ay = std::sqrt(std::max(0.0, (m[4] + 1.0) * 0.5));
            double az = std::sqrt(std::max(0.0, (m[8] + 1.0) * 0.5));
            if (m[1] + m[3] < 0) ay = -ay;
            if (m[2] + m[6] < 0) az = -az;
            return Vec3{ax, ay, az}.normalized() * angle;
        }
        return axis * (angle / s);
    }
};

// Rigid transform: p -> R*p + t.
struct Transform {
    Mat3 R;
    Vec3 t;

    static Transform identity() { return {}; }
    Vec3 apply(const Vec3& v) const { return R.apply(v) + t; }
    Transform operator*(const Transform& o) const { return {R * o.R, R.apply(o.t) + t}; }
    Transform inverse() const {
        Mat3 rt = R.transposed();
        return {rt, rt.apply(t) * -1.0};
    }
};

}  // namespace soma
