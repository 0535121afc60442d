#include "lcps/lda/slda.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <string>

namespace lcps {

LdaState::LdaState(Eigen::Index dimension)
    : dimension_(dimension), covariance_(Eigen::MatrixXd::Zero(dimension, dimension))
{
    if (dimension < 1)
        throw ConfigError("lda: embedding dimension must be positive");
}

const LdaState::Decision& LdaState::decision() const
{
    if (!decision_)
        throw StateError("lda: state has not been finalized");
    return *decision_;
}

void LdaState::fit_task(const Eigen::MatrixXd& embeddings)
{
    if (embeddings.rows() != dimension_)
        throw DimensionError("lda: embeddings have dimension " + std::to_string(embeddings.rows()) + ", expected "
                             + std::to_string(dimension_));
    if (embeddings.cols() < 1)
        throw DimensionError("lda: a task needs at least one embedding");
    if (!embeddings.allFinite())
        throw NumericError("lda: non-finite embedding");

    const double t = static_cast<double>(means_.size() + 1);
    const Eigen::VectorXd mu = embeddings.rowwise().mean();
    const Eigen::MatrixXd centered = embeddings.colwise() - mu;

    // Lower triangle only, mirrored, so the result is exactly symmetric.
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dimension_, dimension_);
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered);
    scatter.triangularView<Eigen::StrictlyUpper>() = scatter.transpose();

    const Eigen::MatrixXd delta = ((t - 1.0) / t) * scatter;
    covariance_ = ((t - 1.0) * covariance_ + delta) / t;
    means_.push_back(mu);
    decision_.reset();
}

void LdaState::finalize(double shrinkage)
{
    if (means_.empty())
        throw StateError("lda: cannot finalize before any task was fitted");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0))
        throw ConfigError("lda: shrinkage must lie in (0, 1]");

    const Eigen::Index d = dimension_;
    const Eigen::MatrixXd regularized =
        (1.0 - shrinkage) * covariance_ + shrinkage * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(regularized, Eigen::EigenvaluesOnly);
        throw NumericError("lda: shrunk covariance is not positive definite (smallest eigenvalue "
                           + std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
    Decision dec;
    dec.shrinkage = shrinkage;
    dec.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
    dec.precision = (0.5 * (dec.precision + dec.precision.transpose())).eval();

    const auto T = static_cast<Eigen::Index>(means_.size());
    Eigen::MatrixXd M(T, d);
    for (Eigen::Index t = 0; t < T; ++t)
        M.row(t) = means_[static_cast<std::size_t>(t)].transpose();
    dec.weights = M * dec.precision;
    dec.offsets.resize(T);
    for (Eigen::Index t = 0; t < T; ++t)
        dec.offsets[t] = -0.5 * dec.weights.row(t).dot(means_[static_cast<std::size_t>(t)]);
    decision_ = std::move(dec);
}

Eigen::VectorXd LdaState::scores(const Eigen::VectorXd& z) const
{
    const Decision& dec = decision();
    if (z.size() != dimension_)
        throw DimensionError("lda: query has dimension " + std::to_string(z.size()) + ", expected "
                             + std::to_string(dimension_));
    return dec.weights * z + dec.offsets;
}

int LdaState::predict(const Eigen::VectorXd& z) const
{
    const Eigen::VectorXd s = scores(z);
    int best = 0;
    for (Eigen::Index t = 1; t < s.size(); ++t)
        if (s[t] > s[best])
            best = static_cast<int>(t);
    return best;
}

LdaState LdaState::restore(Eigen::Index dimension, std::vector<Eigen::VectorXd> means, Eigen::MatrixXd covariance)
{
    LdaState s(dimension);
    if (covariance.rows() != dimension || covariance.cols() != dimension)
        throw DimensionError("lda: stored covariance has the wrong shape");
    for (const auto& m : means)
        if (m.size() != dimension)
            throw DimensionError("lda: stored mean has the wrong dimension");
    s.means_ = std::move(means);
    s.covariance_ = std::move(covariance);
    return s;
}

} // namespace lcps
