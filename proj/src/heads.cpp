#include "stonet/heads.hpp"

#include "stonet/error.hpp"

#include <algorithm>
#include <cmath>

namespace stonet {

std::string to_string(HeadKind k) { return k == HeadKind::linear ? "linear" : "logistic"; }

HeadKind parse_head_kind(const std::string& s) {
    if (s == "linear") return HeadKind::linear;
    if (s == "logistic") return HeadKind::logistic;
    throw InvalidArgument("unknown head '" + s + "'");
}

namespace {

Matrix design(const Matrix& z) {
    Matrix d(z.rows(), z.cols() + 1);
    d.leftCols(z.cols()) = z;
    d.col(z.cols()).setOnes();
    return d;
}

/// Row-wise softmax of scores.
Matrix softmax_rows(const Matrix& scores) {
    Matrix p = scores;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        p.row(i).array() -= p.row(i).maxCoeff();
        p.row(i) = p.row(i).array().exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

double mean_nll(const Matrix& d, const Matrix& w, const std::vector<int>& labels) {
    const Matrix scores = d * w;
    double s = 0.0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        const double lse = m + std::log((scores.row(i).array() - m).exp().sum());
        s += lse - scores(i, labels[static_cast<std::size_t>(i)]);
    }
    return s / static_cast<double>(scores.rows());
}

double penalty(const Matrix& w, double l2) {
    return 0.5 * l2 * w.topRows(w.rows() - 1).squaredNorm();
}

}  // namespace

HeadModel fit_linear(const Matrix& z, const Matrix& y) {
    if (z.rows() != y.rows()) throw InvalidArgument("fit_linear: row counts differ");
    if (z.rows() <= z.cols()) throw InvalidArgument("fit_linear: need more observations than features");
    const Matrix d = design(z);
    HeadModel head;
    head.kind = HeadKind::linear;
    Eigen::ColPivHouseholderQR<Matrix> qr(d);
    if (qr.rank() == d.cols()) {
        head.weights = qr.solve(y);
    } else {
        Matrix gram = d.transpose() * d;
        head.meta.ridge = 1e-8 * std::max(gram.trace(), 1.0) / static_cast<double>(d.cols());
        gram.diagonal().array() += head.meta.ridge;
        head.weights = gram.ldlt().solve(d.transpose() * y);
    }
    head.meta.objective = (y - d * head.weights).squaredNorm();
    head.meta.iterations = 1;
    return head;
}

double logistic_objective(const HeadModel& head, const Matrix& z, const std::vector<int>& labels,
                          double l2) {
    return mean_nll(design(z), head.weights, labels) + penalty(head.weights, l2);
}

HeadModel fit_logistic(const Matrix& z, const std::vector<int>& labels, int classes,
                       const LogisticOptions& options) {
    if (static_cast<Eigen::Index>(labels.size()) != z.rows())
        throw InvalidArgument("fit_logistic: label count mismatch");
    if (classes < 2) throw InvalidArgument("fit_logistic: need at least two classes");
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= classes) throw InvalidArgument("fit_logistic: label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    int present = 0;
    for (int c : counts) present += c > 0;
    if (present < 2) throw InvalidArgument("fit_logistic: need at least two classes present");

    const Matrix d = design(z);
    const Eigen::Index n = d.rows();
    const Eigen::Index m = d.cols();  // q + 1
    const Eigen::Index free = classes - 1;
    const Eigen::Index dim = m * free;
    Matrix onehot = Matrix::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

    HeadModel head;
    head.kind = HeadKind::logistic;
    head.weights = Matrix::Zero(m, classes);
    Vector mask = Vector::Ones(m);
    mask[m - 1] = 0.0;  // intercept unpenalized

    auto objective = [&](const Matrix& w) { return mean_nll(d, w, labels) + penalty(w, options.l2); };
    double f = objective(head.weights);
    head.meta.objective_trace.push_back(f);
    head.meta.converged = false;

    for (int it = 0; it < options.max_iter; ++it) {
        const Matrix p = softmax_rows(d * head.weights);
        const Matrix g_full = d.transpose() * (p - onehot) / static_cast<double>(n);
        Matrix g = g_full.leftCols(free);
        g += (options.l2 * mask).asDiagonal() * head.weights.leftCols(free);
        // vectorized column-major: index = c * m + j
        const Vector grad = Eigen::Map<const Vector>(g.data(), dim);
        if (grad.norm() < options.tol) {
            head.meta.converged = true;
            head.meta.iterations = it;
            break;
        }
        Matrix hess = Matrix::Zero(dim, dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Matrix outer = d.row(i).transpose() * d.row(i);
            for (Eigen::Index a = 0; a < free; ++a)
                for (Eigen::Index b = 0; b < free; ++b) {
                    const double w = (a == b ? p(i, a) : 0.0) - p(i, a) * p(i, b);
                    hess.block(a * m, b * m, m, m) += w * outer;
                }
        }
        hess /= static_cast<double>(n);
        for (Eigen::Index a = 0; a < free; ++a)
            hess.diagonal().segment(a * m, m) += options.l2 * mask;
        Eigen::LDLT<Matrix> ldlt(hess);
        Vector step = ldlt.solve(-grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(grad) >= 0.0) step = -grad;

        // Backtracking line search keeps the objective non-increasing.
        double t = 1.0;
        Matrix candidate = head.weights;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            candidate = head.weights;
            candidate.leftCols(free) += t * Eigen::Map<const Matrix>(step.data(), m, free);
            f_new = objective(candidate);
            if (f_new <= f + 1e-4 * t * grad.dot(step)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        head.meta.iterations = it + 1;
        if (!accepted) break;  // no further decrease possible at working precision
        head.weights = std::move(candidate);
        f = f_new;
        head.meta.objective_trace.push_back(f);
    }
    if (!head.meta.converged) {
        // final gradient check after the last accepted step
        const Matrix p = softmax_rows(d * head.weights);
        Matrix g = (d.transpose() * (p - onehot) / static_cast<double>(n)).leftCols(free);
        g += (options.l2 * mask).asDiagonal() * head.weights.leftCols(free);
        head.meta.converged = g.norm() < options.tol;
    }
    head.meta.objective = f;
    return head;
}

Matrix predict(const HeadModel& head, const Matrix& z) {
    if (z.cols() + 1 != head.weights.rows())
        throw InvalidArgument("predict: feature count does not match head");
    const Matrix scores = design(z) * head.weights;
    return head.kind == HeadKind::linear ? scores : softmax_rows(scores);
}

std::vector<int> predict_labels(const HeadModel& head, const Matrix& z) {
    if (head.kind != HeadKind::logistic) throw InvalidArgument("predict_labels: not a classifier");
    const Matrix scores = design(z) * head.weights;
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index arg = 0;
        scores.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

std::optional<double> pearson(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    const double na = ca.norm();
    const double nb = cb.norm();
    if (!(na > 0.0) || !(nb > 0.0)) return std::nullopt;
    return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

Metrics evaluate(const HeadModel& head, const Matrix& z_test, const Targets& y_test) {
    if (y_test.size() != z_test.rows()) throw InvalidArgument("evaluate: row counts differ");
    Metrics m;
    if (head.kind == HeadKind::logistic) {
        if (!y_test.is_classification()) throw InvalidArgument("evaluate: classifier needs labels");
        const auto pred = predict_labels(head, z_test);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != y_test.labels[i];
        m.misclassification_rate = static_cast<double>(wrong) / static_cast<double>(pred.size());
        return m;
    }
    if (y_test.is_classification()) throw InvalidArgument("evaluate: regression head needs values");
    const Matrix pred = predict(head, z_test);  // n x d
    const Matrix truth = y_test.values.transpose();
    if (pred.cols() != truth.cols()) throw InvalidArgument("evaluate: response width mismatch");
    m.mse = (pred - truth).squaredNorm() / static_cast<double>(pred.size());
    m.pearson_r = pearson(pred.col(0), truth.col(0));
    m.pearson_undefined = !m.pearson_r.has_value();
    return m;
}

}  // namespace stonet
