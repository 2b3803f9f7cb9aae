#pragma once

/** @file
 * Discretized L^2[0,1]: curves sampled on a uniform midpoint grid, the
 * quadrature inner product, and integral-kernel operators.
 *
 * A kernel matrix K represents the operator
 *     (A z)(t_j) = (1/m) sum_i K(i, j) z(s_i),
 * so that the matrix acting on sample vectors ("action matrix") is K^T / m.
 * The map z -> z / sqrt(m) is an isometry onto Euclidean R^m, hence the
 * singular values of K / m are exactly the singular values of A on H.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace carh {

class Grid {
public:
    explicit Grid(std::size_t m) : m_(m) {
        if (m < 2) {
            throw std::invalid_argument("Grid: need at least 2 points, got " + std::to_string(m));
        }
        points_.resize(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            points_[static_cast<Eigen::Index>(i)] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        }
    }

    std::size_t size() const noexcept { return m_; }
    Eigen::Index isize() const noexcept { return static_cast<Eigen::Index>(m_); }
    double weight() const noexcept { return 1.0 / static_cast<double>(m_); }
    const Eigen::VectorXd& points() const noexcept { return points_; }
    double point(std::size_t i) const { return points_[static_cast<Eigen::Index>(i)]; }

private:
    std::size_t m_;
    Eigen::VectorXd points_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(std::size_t m) { return std::make_shared<const Grid>(m); }

// The midpoint grid is fully determined by m.
inline bool same_grid(const GridPtr& a, const GridPtr& b) noexcept {
    return a && b && (a == b || a->size() == b->size());
}

inline void require_same_grid(const GridPtr& a, const GridPtr& b, const char* where) {
    if (!same_grid(a, b)) {
        throw std::invalid_argument(std::string(where) + ": grid mismatch (" +
                                    std::to_string(a ? a->size() : 0) + " vs " +
                                    std::to_string(b ? b->size() : 0) + " points)");
    }
}

class Curve {
public:
    Curve(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (!grid_) throw std::invalid_argument("Curve: null grid");
        if (values_.size() != grid_->isize()) {
            throw std::invalid_argument("Curve: expected " + std::to_string(grid_->size()) +
                                        " values, got " + std::to_string(values_.size()));
        }
        if (!values_.allFinite()) throw std::invalid_argument("Curve: non-finite value");
    }

    static Curve zero(const GridPtr& grid) { return Curve(grid, Eigen::VectorXd::Zero(grid->isize())); }
    static Curve constant(const GridPtr& grid, double c) {
        return Curve(grid, Eigen::VectorXd::Constant(grid->isize(), c));
    }
    template <class F>
    static Curve sample(const GridPtr& grid, F&& f) {
        Eigen::VectorXd v(grid->isize());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f(grid->points()[i]);
        return Curve(grid, std::move(v));
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return grid_->size(); }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

    Curve& operator+=(const Curve& o) {
        require_same_grid(grid_, o.grid_, "Curve::operator+=");
        values_ += o.values_;
        return *this;
    }
    Curve& operator-=(const Curve& o) {
        require_same_grid(grid_, o.grid_, "Curve::operator-=");
        values_ -= o.values_;
        return *this;
    }
    Curve& operator*=(double s) {
        values_ *= s;
        return *this;
    }

    friend Curve operator+(Curve a, const Curve& b) { return a += b; }
    friend Curve operator-(Curve a, const Curve& b) { return a -= b; }
    friend Curve operator*(Curve a, double s) { return a *= s; }
    friend Curve operator*(double s, Curve a) { return a *= s; }
    friend Curve operator-(Curve a) { return a *= -1.0; }

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
};

inline double inner_product(const Curve& f, const Curve& g) {
    require_same_grid(f.grid(), g.grid(), "inner_product");
    return f.values().dot(g.values()) * f.grid()->weight();
}

inline double h_norm(const Curve& f) { return std::sqrt(inner_product(f, f)); }

/// Largest absolute grid value.
inline double sup_abs(const Curve& f) { return f.values().cwiseAbs().maxCoeff(); }

class DiscretizedOperator {
public:
    DiscretizedOperator(GridPtr grid, Eigen::MatrixXd kernel) : grid_(std::move(grid)), kernel_(std::move(kernel)) {
        if (!grid_) throw std::invalid_argument("DiscretizedOperator: null grid");
        if (kernel_.rows() != grid_->isize() || kernel_.cols() != grid_->isize()) {
            throw std::invalid_argument("DiscretizedOperator: kernel must be " + std::to_string(grid_->size()) +
                                        "x" + std::to_string(grid_->size()));
        }
        if (!kernel_.allFinite()) throw std::invalid_argument("DiscretizedOperator: non-finite kernel entry");
    }

    static DiscretizedOperator zero(const GridPtr& grid) {
        return DiscretizedOperator(grid, Eigen::MatrixXd::Zero(grid->isize(), grid->isize()));
    }
    static DiscretizedOperator identity(const GridPtr& grid) {
        return from_action(grid, Eigen::MatrixXd::Identity(grid->isize(), grid->isize()));
    }
    /// Builds the operator whose action on sample vectors is `action`.
    static DiscretizedOperator from_action(const GridPtr& grid, const Eigen::MatrixXd& action) {
        return DiscretizedOperator(grid, action.transpose() * static_cast<double>(grid->size()));
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& kernel() const noexcept { return kernel_; }
    Eigen::MatrixXd action() const { return kernel_.transpose() * grid_->weight(); }

    DiscretizedOperator& operator+=(const DiscretizedOperator& o) {
        require_same_grid(grid_, o.grid_, "DiscretizedOperator::operator+=");
        kernel_ += o.kernel_;
        return *this;
    }
    DiscretizedOperator& operator-=(const DiscretizedOperator& o) {
        require_same_grid(grid_, o.grid_, "DiscretizedOperator::operator-=");
        kernel_ -= o.kernel_;
        return *this;
    }
    DiscretizedOperator& operator*=(double s) {
        kernel_ *= s;
        return *this;
    }
    friend DiscretizedOperator operator+(DiscretizedOperator a, const DiscretizedOperator& b) { return a += b; }
    friend DiscretizedOperator operator-(DiscretizedOperator a, const DiscretizedOperator& b) { return a -= b; }
    friend DiscretizedOperator operator*(DiscretizedOperator a, double s) { return a *= s; }
    friend DiscretizedOperator operator*(double s, DiscretizedOperator a) { return a *= s; }

private:
    GridPtr grid_;
    Eigen::MatrixXd kernel_;
};

/// (u (x) w)(z) = <u, z> w.
inline DiscretizedOperator tensor(const Curve& u, const Curve& w) {
    require_same_grid(u.grid(), w.grid(), "tensor");
    return DiscretizedOperator(u.grid(), u.values() * w.values().transpose());
}

inline Curve operator_apply(const DiscretizedOperator& a, const Curve& z) {
    require_same_grid(a.grid(), z.grid(), "operator_apply");
    return Curve(z.grid(), a.kernel().transpose() * z.values() * z.grid()->weight());
}

/// a o b, i.e. z -> a(b(z)).
inline DiscretizedOperator compose(const DiscretizedOperator& a, const DiscretizedOperator& b) {
    require_same_grid(a.grid(), b.grid(), "compose");
    return DiscretizedOperator(a.grid(), b.kernel() * a.kernel() * a.grid()->weight());
}

struct OperatorNorms {
    double trace = 0.0;            ///< sum of singular values
    double hilbert_schmidt = 0.0;  ///< root of the sum of squared singular values
    double sup = 0.0;              ///< largest singular value
};

inline Eigen::VectorXd singular_values(const DiscretizedOperator& a) {
    if (!a.kernel().allFinite()) throw std::invalid_argument("singular_values: non-finite kernel");
    const Eigen::MatrixXd scaled = a.kernel() * a.grid()->weight();
    return Eigen::JacobiSVD<Eigen::MatrixXd>(scaled).singularValues();
}

inline OperatorNorms operator_norms(const DiscretizedOperator& a) {
    const Eigen::VectorXd sv = singular_values(a);
    OperatorNorms n;
    n.trace = sv.sum();
    n.hilbert_schmidt = (a.kernel() * a.grid()->weight()).norm();
    n.sup = sv.size() > 0 ? sv.maxCoeff() : 0.0;
    return n;
}

inline double hs_norm(const DiscretizedOperator& a) { return (a.kernel() * a.grid()->weight()).norm(); }
inline double sup_norm(const DiscretizedOperator& a) { return operator_norms(a).sup; }

}  // namespace carh
