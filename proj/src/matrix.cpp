#include "gorl/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

namespace gorl {

int worker_threads() {
    static const int n = [] {
        if (const char* env = std::getenv("GORL_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        return 1;
    }();
    return n;
}

namespace {

void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c, int r0, int r1) {
    const int n = a.cols();
    const int p = b.cols();
    const double* ad = a.data();
    const double* bd = b.data();
    double* cd = c.data();
    for (int i = r0; i < r1; ++i) {
        double* crow = cd + static_cast<size_t>(i) * p;
        const double* arow = ad + static_cast<size_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const double aik = arow[k];
            const double* brow = bd + static_cast<size_t>(k) * p;
            for (int j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix c(a.rows(), b.cols(), 0.0);
    const int threads = worker_threads();
    const long flops = static_cast<long>(a.rows()) * a.cols() * b.cols();
    if (threads <= 1 || a.rows() < 2 * threads || flops < 1 << 18) {
        matmul_rows(a, b, c, 0, a.rows());
        return c;
    }
    std::vector<std::thread> pool;
    const int chunk = (a.rows() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int r0 = t * chunk;
        const int r1 = std::min(a.rows(), r0 + chunk);
        if (r0 >= r1) break;
        pool.emplace_back(matmul_rows, std::cref(a), std::cref(b), std::ref(c), r0, r1);
    }
    for (auto& th : pool) th.join();
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
    return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add_inplace");
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void add_row_inplace(Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("add_row_inplace: row vector shape mismatch");
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) a(i, j) += row(0, j);
}

Matrix col_sums(const Matrix& m) {
    Matrix s(1, m.cols(), 0.0);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) s(0, j) += m(i, j);
    return s;
}

bool all_finite(const Matrix& m) {
    for (size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

}  // namespace gorl
