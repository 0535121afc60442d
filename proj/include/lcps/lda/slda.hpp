#pragma once

#include "lcps/core/errors.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace lcps {

/// Streaming LDA over task-level batches of embeddings.
///
/// Per task t (1-based) with embeddings Z (d x N_t) and mean mu_t:
///   Sigma_t = ((t-1) Sigma_{t-1} + Delta_t) / t,
///   Delta_t = (t-1)/t * (Z - mu_t)(Z - mu_t)^T,
/// so Sigma is still zero after the first task. finalize() forms the shrunk
/// precision Lambda = [(1-eps) Sigma + eps I]^-1 and the linear rule
/// W = M Lambda, b_i = -1/2 mu_i^T Lambda mu_i, where the rows of M are the means.
/// All arithmetic is double precision.
class LdaState {
public:
    struct Decision {
        Eigen::MatrixXd precision; // Lambda, d x d
        Eigen::MatrixXd weights;   // W, T x d
        Eigen::VectorXd offsets;   // b, T
        double shrinkage = 0.0;
    };

    LdaState() = default;
    explicit LdaState(Eigen::Index dimension);

    Eigen::Index dimension() const { return dimension_; }
    int task_count() const { return static_cast<int>(means_.size()); }
    const std::vector<Eigen::VectorXd>& means() const { return means_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    bool finalized() const { return decision_.has_value(); }
    const Decision& decision() const;

    /// Adds one task given its embeddings as columns. Invalidates the decision rule.
    void fit_task(const Eigen::MatrixXd& embeddings);

    /// Builds Lambda, W and b with shrinkage eps in (0, 1] via a Cholesky factorization.
    void finalize(double shrinkage);

    /// Linear scores W z + b, one per task.
    Eigen::VectorXd scores(const Eigen::VectorXd& z) const;

    /// argmax of scores(z); ties go to the lowest task index (0-based).
    int predict(const Eigen::VectorXd& z) const;

    /// Restores a state from stored means and covariance (used by checkpoints).
    static LdaState restore(Eigen::Index dimension, std::vector<Eigen::VectorXd> means, Eigen::MatrixXd covariance);

private:
    Eigen::Index dimension_ = 0;
    std::vector<Eigen::VectorXd> means_;
    Eigen::MatrixXd covariance_;
    std::optional<Decision> decision_;
};

} // namespace lcps
