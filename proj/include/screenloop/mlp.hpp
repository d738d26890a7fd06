#pragma once

// Residual multilayer perceptron with hand-written backpropagation.
//
//   h0      = relu(W_in x + b_in)
//   h_{k+1} = h_k + dropout(relu(W_k h_k + b_k))      k = 0..n_blocks-1
//   out     = W_out h_L + b_out
//
// Samples are columns. All parameters live in one flat vector so that
// clipping, optimizer state and best-epoch snapshots are plain vector ops.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace screenloop {

enum class LossKind { cross_entropy, squared_error };

template <typename T>
class ResidualMlp {
public:
    using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;
    using VectorMap = Eigen::Map<Vector>;
    using ConstVectorMap = Eigen::Map<const Vector>;

    ResidualMlp() = default;

    ResidualMlp(std::size_t input_dim, std::size_t hidden, std::size_t n_blocks, std::size_t n_outputs)
        : input_dim_(input_dim), hidden_(hidden), n_blocks_(n_blocks), n_outputs_(n_outputs) {
        params_ = Vector::Zero(static_cast<Eigen::Index>(parameter_count()));
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t n_blocks() const noexcept { return n_blocks_; }
    std::size_t n_outputs() const noexcept { return n_outputs_; }

    std::size_t parameter_count() const noexcept {
        return hidden_ * input_dim_ + hidden_ + n_blocks_ * (hidden_ * hidden_ + hidden_) +
               n_outputs_ * hidden_ + n_outputs_;
    }

    Vector& parameters() noexcept { return params_; }
    const Vector& parameters() const noexcept { return params_; }

    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
    template <typename Rng>
    void initialize(Rng& rng) {
        params_.setZero();
        auto fill = [&](MatrixMap w, std::size_t fan_in) {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(bound * u(rng));
        };
        fill(w_in(params_), input_dim_);
        for (std::size_t k = 0; k < n_blocks_; ++k) fill(w_block(params_, k), hidden_);
        fill(w_out(params_), hidden_);
    }

    /// Inference forward pass (no dropout). `x` is input_dim x batch.
    Matrix forward(const Eigen::Ref<const Matrix>& x) const {
        Matrix h = (w_in(params_) * x).colwise() + b_in(params_);
        h = h.cwiseMax(T(0));
        for (std::size_t k = 0; k < n_blocks_; ++k) {
            Matrix z = (w_block(params_, k) * h).colwise() + b_block(params_, k);
            h += z.cwiseMax(T(0));
        }
        return (w_out(params_) * h).colwise() + b_out(params_);
    }

    /// Mean loss over the batch and its gradient w.r.t. the flat parameters.
    /// For cross-entropy `targets` is 1 x batch of class indices; for squared
    /// error it is n_outputs x batch. Dropout is applied only when `rng` is
    /// non-null and dropout > 0.
    template <typename Rng = std::mt19937_64>
    T loss_and_gradient(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& targets,
                        LossKind loss, Vector& grad, T dropout = T(0), Rng* rng = nullptr) const {
        const Eigen::Index batch = x.cols();
        grad.setZero(params_.size());

        Matrix pre0 = (w_in(params_) * x).colwise() + b_in(params_);
        std::vector<Matrix> h(n_blocks_ + 1);
        std::vector<Matrix> z(n_blocks_);
        std::vector<Matrix> mask(n_blocks_);
        h[0] = pre0.cwiseMax(T(0));
        const bool use_dropout = rng != nullptr && dropout > T(0);
        const T keep_scale = use_dropout ? T(1) / (T(1) - dropout) : T(1);
        for (std::size_t k = 0; k < n_blocks_; ++k) {
            z[k] = (w_block(params_, k) * h[k]).colwise() + b_block(params_, k);
            Matrix r = z[k].cwiseMax(T(0));
            if (use_dropout) {
                std::bernoulli_distribution keep(1.0 - static_cast<double>(dropout));
                mask[k].resize(r.rows(), r.cols());
                for (Eigen::Index i = 0; i < mask[k].size(); ++i)
                    mask[k].data()[i] = keep(*rng) ? keep_scale : T(0);
                r = r.cwiseProduct(mask[k]);
            }
            h[k + 1] = h[k] + r;
        }
        Matrix out = (w_out(params_) * h[n_blocks_]).colwise() + b_out(params_);

        T total = 0;
        Matrix dout(out.rows(), batch);
        if (loss == LossKind::cross_entropy) {
            for (Eigen::Index j = 0; j < batch; ++j) {
                const T m = out.col(j).maxCoeff();
                const Vector e = (out.col(j).array() - m).exp().matrix();
                const T s = e.sum();
                dout.col(j) = e / s;
                const auto label = static_cast<Eigen::Index>(targets(0, j));
                total += -(out(label, j) - m - std::log(s));
                dout(label, j) -= T(1);
            }
            dout /= static_cast<T>(batch);
        } else {
            Matrix diff = out - targets;
            total = diff.squaredNorm();
            dout = diff * (T(2) / static_cast<T>(batch));
        }
        total /= static_cast<T>(batch);

        w_out(grad).noalias() = dout * h[n_blocks_].transpose();
        b_out(grad) = dout.rowwise().sum();
        Matrix dh = w_out(params_).transpose() * dout;
        for (std::size_t kk = n_blocks_; kk-- > 0;) {
            Matrix dz = dh;
            if (use_dropout) dz = dz.cwiseProduct(mask[kk]);
            dz = (z[kk].array() > T(0)).select(dz, T(0));
            w_block(grad, kk).noalias() = dz * h[kk].transpose();
            b_block(grad, kk) = dz.rowwise().sum();
            dh.noalias() += w_block(params_, kk).transpose() * dz;
        }
        Matrix dpre0 = (pre0.array() > T(0)).select(dh, T(0));
        w_in(grad).noalias() = dpre0 * x.transpose();
        b_in(grad) = dpre0.rowwise().sum();
        return total;
    }

    // Flat-layout views, usable on the parameter vector or a gradient.
    MatrixMap w_in(Vector& v) const { return {v.data(), rows(hidden_), rows(input_dim_)}; }
    ConstMatrixMap w_in(const Vector& v) const { return {v.data(), rows(hidden_), rows(input_dim_)}; }
    VectorMap b_in(Vector& v) const { return {v.data() + off_b_in(), rows(hidden_)}; }
    ConstVectorMap b_in(const Vector& v) const { return {v.data() + off_b_in(), rows(hidden_)}; }
    MatrixMap w_block(Vector& v, std::size_t k) const {
        return {v.data() + off_block(k), rows(hidden_), rows(hidden_)};
    }
    ConstMatrixMap w_block(const Vector& v, std::size_t k) const {
        return {v.data() + off_block(k), rows(hidden_), rows(hidden_)};
    }
    VectorMap b_block(Vector& v, std::size_t k) const {
        return {v.data() + off_block(k) + hidden_ * hidden_, rows(hidden_)};
    }
    ConstVectorMap b_block(const Vector& v, std::size_t k) const {
        return {v.data() + off_block(k) + hidden_ * hidden_, rows(hidden_)};
    }
    MatrixMap w_out(Vector& v) const { return {v.data() + off_out(), rows(n_outputs_), rows(hidden_)}; }
    ConstMatrixMap w_out(const Vector& v) const {
        return {v.data() + off_out(), rows(n_outputs_), rows(hidden_)};
    }
    VectorMap b_out(Vector& v) const { return {v.data() + off_out() + n_outputs_ * hidden_, rows(n_outputs_)}; }
    ConstVectorMap b_out(const Vector& v) const {
        return {v.data() + off_out() + n_outputs_ * hidden_, rows(n_outputs_)};
    }

private:
    static Eigen::Index rows(std::size_t n) { return static_cast<Eigen::Index>(n); }
    std::size_t off_b_in() const { return hidden_ * input_dim_; }
    std::size_t off_block(std::size_t k) const { return off_b_in() + hidden_ + k * (hidden_ * hidden_ + hidden_); }
    std::size_t off_out() const { return off_block(n_blocks_); }

    std::size_t input_dim_ = 0;
    std::size_t hidden_ = 0;
    std::size_t n_blocks_ = 0;
    std::size_t n_outputs_ = 0;
    Vector params_;
};

}  // namespace screenloop
