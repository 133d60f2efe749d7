#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace mdmtl {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;

// Error hierarchy. Every failure the library reports derives from Error so
// callers (the CLI in particular) can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing/duplicate columns, malformed header.
struct SchemaError : Error {
    using Error::Error;
};

// Unparseable cell; message carries row and column.
struct ParseError : Error {
    using Error::Error;
};

// A task that is empty, or too small for the requested operation.
struct DegenerateTaskError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

inline void require_dims(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(where) + ": shape mismatch (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
}

}  // namespace detail
}  // namespace mdmtl
