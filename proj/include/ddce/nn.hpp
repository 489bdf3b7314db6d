#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ddce/errors.hpp"

namespace ddce::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Linear, ReLU, Sigmoid, Tanh };

Matrix activate(const Matrix& z, Activation a);
/// Elementwise derivative d act / d z, given pre-activation z and output a.
Matrix activate_deriv(const Matrix& z, const Matrix& a, Activation act);

/// Flat view of one parameter (or gradient) tensor.
struct TensorRef {
    double* data;
    long size;
};

long total_size(const std::vector<TensorRef>& refs);

struct TrainConfig {
    int epochs = 500;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double train_snr_db = 40.0;
    std::uint64_t seed = 0;

    /// Table II defaults (FNN / LSTM estimators).
    static TrainConfig sbs_defaults() { return {}; }
    /// Table III defaults (CNN estimators): 250 epochs.
    static TrainConfig fbf_defaults() {
        TrainConfig c;
        c.epochs = 250;
        return c;
    }
};

// ---------------------------------------------------------------- dense

struct Dense {
    int n_in = 0, n_out = 0;
    Activation act = Activation::Linear;
    Matrix w;   ///< n_out x n_in
    Vector b;   ///< n_out
    Matrix gw;
    Vector gb;

    Dense() = default;
    Dense(int in, int out, Activation a);
    void init_he(std::mt19937_64& rng);
    void zero_grads();

    struct Cache {
        Matrix x, z, a;
    };
    /// x: n_in x batch
    Matrix forward(const Matrix& x) const;
    Matrix forward_train(const Matrix& x, Cache& c) const;
    /// Accumulates gw/gb, returns dx.
    Matrix backward(const Matrix& da, const Cache& c);
};

class FnnNet {
  public:
    FnnNet() = default;
    /// dims = {in, hidden..., out}; ReLU on hidden layers, linear output.
    FnnNet(const std::vector<int>& dims, std::uint64_t seed);
    /// Exact identity map: one linear layer with identity weights.
    static FnnNet identity(int dim);

    Matrix forward(const Matrix& x) const;
    Vector forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

    std::vector<TensorRef> param_refs();
    std::vector<TensorRef> grad_refs();
    void zero_grads();
    long n_params() const;
    const std::vector<int>& dims() const { return dims_; }

    std::vector<Dense> layers;

  private:
    std::vector<int> dims_;
};

// ---------------------------------------------------------------- LSTM

/// Gate blocks are stacked in the order [input; forget; candidate; output].
struct LstmCell {
    int k_in = 0, n_hidden = 0;
    Activation gate_act = Activation::Sigmoid;
    Activation cand_act = Activation::Tanh;
    Matrix wx;  ///< 4P x K_in
    Matrix wh;  ///< 4P x P
    Vector b;   ///< 4P
    Matrix gwx, gwh;
    Vector gb;

    LstmCell() = default;
    LstmCell(int k_in_, int n_hidden_, std::uint64_t seed);
    void zero_grads();

    struct State {
        Matrix h, c;  ///< P x batch
        void reset(int p, int batch);
    };
    struct Cache {
        Matrix x, h_prev, c_prev, gi, gf, gg, go, c, tc;
    };

    void step(const Matrix& x, State& s) const;
    void step_train(const Matrix& x, State& s, Cache& cache) const;
    /// dh: gradient into h_t (readout + recurrent); dc carried between steps.
    /// Returns dx, replaces dh/dc with the gradients into h_{t-1}, c_{t-1}.
    Matrix backward_step(Matrix& dh, Matrix& dc, const Cache& cache);
};

/// Single LSTM whose readout is the first n_out hidden units (the op-count
/// formulas contain no projection layer).
class LstmNet {
  public:
    LstmNet() = default;
    LstmNet(int k_in, int n_hidden, int n_out, std::uint64_t seed);
    /// Exact identity: linear gates, candidate passes the input through,
    /// input gate 1, forget gate 0, output gate 1.
    static LstmNet identity(int k_in, int n_hidden, int n_out);

    int n_out() const { return n_out_; }
    int k_in() const { return cell.k_in; }

    /// Single-step inference; the caller owns the recurrent state, so one
    /// net can serve many frames (or threads) at once.
    LstmCell::State make_state(int batch = 1) const;
    Matrix step(const Matrix& x, LstmCell::State& s) const;
    Vector step(const Vector& x, LstmCell::State& s) const {
        return step(Matrix(x), s).col(0);
    }

    std::vector<TensorRef> param_refs();
    std::vector<TensorRef> grad_refs();
    void zero_grads();
    long n_params() const;

    LstmCell cell;

  private:
    int n_out_ = 0;
};

/// LSTM followed by an FNN head, trained jointly (the LSTM-FNN-DPA graph).
class LstmFnnNet {
  public:
    LstmFnnNet() = default;
    LstmFnnNet(int k_in, int n_hidden, const std::vector<int>& head_dims, std::uint64_t seed);
    static LstmFnnNet identity(int k_in, int n_hidden, int n_out);

    LstmCell::State make_state(int batch = 1) const;
    Matrix step(const Matrix& x, LstmCell::State& s) const;
    Vector step(const Vector& x, LstmCell::State& s) const {
        return step(Matrix(x), s).col(0);
    }

    std::vector<TensorRef> param_refs();
    std::vector<TensorRef> grad_refs();
    void zero_grads();
    long n_params() const;

    LstmCell cell;
    FnnNet head;
};

// ---------------------------------------------------------------- conv

/// Images are stored as (H*W) x C matrices, pixels in column-major
/// (row r, col c) -> r + c*H order, zero-padded same convolution.
struct Conv2D {
    int kh = 3, kw = 3, c_in = 1, c_out = 1;
    Activation act = Activation::ReLU;
    bool has_bn = false;
    Matrix w;  ///< (c_in*kh*kw) x c_out
    Vector b;
    Matrix gw;
    Vector gb;
    // batch normalization (per output channel)
    Vector bn_gamma, bn_beta, bn_rmean, bn_rvar;
    Vector bn_ggamma, bn_gbeta;
    double bn_momentum = 0.9, bn_eps = 1e-5;

    Conv2D() = default;
    Conv2D(int kh_, int kw_, int cin, int cout, Activation a, bool bn, std::mt19937_64& rng);
    void zero_grads();
};

void im2col(const Matrix& img, int h, int w, int kh, int kw, Matrix& out);
void col2im(const Matrix& cols, int h, int w, int kh, int kw, Matrix& img);

/// Plain stacked convolutional net (SR-CNN / DN-CNN bodies).
class CnnNet {
  public:
    struct LayerSpec {
        int kernel = 3;
        int maps = 1;
        bool batchnorm = false;
        Activation act = Activation::ReLU;
    };

    CnnNet() = default;
    CnnNet(const std::vector<LayerSpec>& specs, int in_channels, std::uint64_t seed);

    /// SR-CNN (9,f1; 1,f2; 5,1), ReLU except the linear output layer.
    static CnnNet srcnn(int f1, int f2, std::uint64_t seed);
    /// DN-CNN: depth layers of 3x3 kernels, batchnorm on the interior layers.
    static CnnNet dncnn(int depth, int maps, std::uint64_t seed);
    static CnnNet identity_srcnn(int f1, int f2);
    static CnnNet zero_like(const CnnNet& other);

    /// img: (H*W) x c_in for a single sample.
    Matrix forward(const Matrix& img, int h, int w) const;

    /// Accumulate gradients of 0.5-free MSE (mean squared error over all
    /// elements, scaled by `loss_scale`) for one sample; returns the sample's
    /// summed squared error. Target layout matches the net output.
    double sample_backward(const Matrix& img, const Matrix& target, int h, int w,
                           double loss_scale);

    /// Batch training step helpers: batch-aware forward/backward so that
    /// batchnorm statistics span the whole mini-batch.
    double batch_backward(const std::vector<const Matrix*>& imgs,
                          const std::vector<const Matrix*>& targets, int h, int w);

    void set_train_mode(bool on) { train_mode_ = on; }
    std::vector<TensorRef> param_refs();
    std::vector<TensorRef> grad_refs();
    void zero_grads();
    long n_params() const;

    std::vector<Conv2D> layers;

  private:
    double batch_backward_impl(const std::vector<const Matrix*>& imgs,
                               const std::vector<const Matrix*>& targets, int h, int w,
                               double loss_scale);
    bool train_mode_ = false;
};

// ---------------------------------------------------------------- ConvLSTM

/// Convolutional LSTM cell: gate pre-activations are convolutions of the
/// input and the hidden state. Operates on (H*W) x C images per step.
struct ConvLstmCell {
    int kh = 3, kw = 1, c_in = 1, c_hidden = 1;
    Activation gate_act = Activation::Sigmoid;
    Activation cand_act = Activation::Tanh;
    Matrix wx;  ///< (c_in*kh*kw) x 4F
    Matrix wh;  ///< (c_hidden*kh*kw) x 4F
    Vector b;   ///< 4F
    Matrix gwx, gwh;
    Vector gb;

    ConvLstmCell() = default;
    ConvLstmCell(int kh_, int kw_, int cin, int chidden, std::mt19937_64& rng);
    void zero_grads();

    struct State {
        Matrix h, c;  ///< (H*W) x F
        void reset(int pixels, int f);
    };
    struct Cache {
        Matrix xcols, hcols, gi, gf, gg, go, c, tc, c_prev;
    };

    void step(const Matrix& x, int h, int w, State& s) const;
    void step_train(const Matrix& x, int h, int w, State& s, Cache& cache) const;
    Matrix backward_step(Matrix& dh, Matrix& dc, const Cache& cache, int h, int w);
};

/// Stack of ConvLSTM cells applied over the symbol axis; the last layer's
/// hidden state is the output image sequence.
class ConvLstmNet {
  public:
    struct LayerSpec {
        int kernel = 3;
        int maps = 1;
    };

    ConvLstmNet() = default;
    /// Kernels span the image height axis (kw = 1): the recurrence carries
    /// the time axis, convolution the frequency axis.
    ConvLstmNet(const std::vector<LayerSpec>& specs, int in_channels, std::uint64_t seed);
    static ConvLstmNet identity(const std::vector<LayerSpec>& specs);

    /// xs: sequence of (H*W) x c_in images; returns the output sequence.
    std::vector<Matrix> forward(const std::vector<Matrix>& xs, int h, int w) const;

    std::vector<TensorRef> param_refs();
    std::vector<TensorRef> grad_refs();
    void zero_grads();
    long n_params() const;

    std::vector<ConvLstmCell> cells;
};

// ---------------------------------------------------------------- training

class Adam {
  public:
    Adam(long n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

  private:
    Vector m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

/// Anything trainable by the shared mini-batch loop.
class TrainableModel {
  public:
    virtual ~TrainableModel() = default;
    virtual long n_samples() const = 0;
    virtual std::vector<TensorRef> param_refs() = 0;
    virtual std::vector<TensorRef> grad_refs() = 0;
    virtual void zero_grads() = 0;
    /// Accumulate batch gradients; returns (summed squared error, element count).
    virtual std::pair<double, long> batch_backward(const std::vector<int>& idx) = 0;
};

/// Mini-batch ADAM on MSE. Deterministic given cfg.seed; throws
/// TrainingDivergence on a non-finite epoch loss. Returns per-epoch losses.
std::vector<double> train(TrainableModel& model, const TrainConfig& cfg);

/// Dense regression dataset (columns are samples).
class DenseRegression : public TrainableModel {
  public:
    DenseRegression(FnnNet& net, Matrix inputs, Matrix targets);
    long n_samples() const override { return inputs_.cols(); }
    std::vector<TensorRef> param_refs() override { return net_.param_refs(); }
    std::vector<TensorRef> grad_refs() override { return net_.grad_refs(); }
    void zero_grads() override { net_.zero_grads(); }
    std::pair<double, long> batch_backward(const std::vector<int>& idx) override;

  private:
    FnnNet& net_;
    Matrix inputs_, targets_;
};

/// Sequence regression for the plain LSTM (targets on the readout slice).
class LstmSequenceRegression : public TrainableModel {
  public:
    LstmSequenceRegression(LstmNet& net, std::vector<Matrix> seq_inputs,
                           std::vector<Matrix> seq_targets);
    long n_samples() const override { return static_cast<long>(seq_inputs_.size()); }
    std::vector<TensorRef> param_refs() override { return net_.param_refs(); }
    std::vector<TensorRef> grad_refs() override { return net_.grad_refs(); }
    void zero_grads() override { net_.zero_grads(); }
    std::pair<double, long> batch_backward(const std::vector<int>& idx) override;

  private:
    LstmNet& net_;
    std::vector<Matrix> seq_inputs_;   ///< per sample: K_in x T
    std::vector<Matrix> seq_targets_;  ///< per sample: n_out x T
};

class LstmFnnSequenceRegression : public TrainableModel {
  public:
    LstmFnnSequenceRegression(LstmFnnNet& net, std::vector<Matrix> seq_inputs,
                              std::vector<Matrix> seq_targets);
    long n_samples() const override { return static_cast<long>(seq_inputs_.size()); }
    std::vector<TensorRef> param_refs() override { return net_.param_refs(); }
    std::vector<TensorRef> grad_refs() override { return net_.grad_refs(); }
    void zero_grads() override { net_.zero_grads(); }
    std::pair<double, long> batch_backward(const std::vector<int>& idx) override;

  private:
    LstmFnnNet& net_;
    std::vector<Matrix> seq_inputs_;
    std::vector<Matrix> seq_targets_;
};

class CnnRegression : public TrainableModel {
  public:
    CnnRegression(CnnNet& net, std::vector<Matrix> images, std::vector<Matrix> targets,
                  int h, int w);
    long n_samples() const override { return static_cast<long>(images_.size()); }
    std::vector<TensorRef> param_refs() override { return net_.param_refs(); }
    std::vector<TensorRef> grad_refs() override { return net_.grad_refs(); }
    void zero_grads() override { net_.zero_grads(); }
    std::pair<double, long> batch_backward(const std::vector<int>& idx) override;

  private:
    CnnNet& net_;
    std::vector<Matrix> images_, targets_;
    int h_, w_;
};

class ConvLstmSequenceRegression : public TrainableModel {
  public:
    ConvLstmSequenceRegression(ConvLstmNet& net, std::vector<std::vector<Matrix>> seqs,
                               std::vector<std::vector<Matrix>> targets, int h, int w);
    long n_samples() const override { return static_cast<long>(seqs_.size()); }
    std::vector<TensorRef> param_refs() override { return net_.param_refs(); }
    std::vector<TensorRef> grad_refs() override { return net_.grad_refs(); }
    void zero_grads() override { net_.zero_grads(); }
    std::pair<double, long> batch_backward(const std::vector<int>& idx) override;

  private:
    ConvLstmNet& net_;
    std::vector<std::vector<Matrix>> seqs_, targets_;
    int h_, w_;
};

// ---------------------------------------------------------------- checks & io

/// Central finite differences (step 1e-5) against analytic gradients.
/// `loss_backward` must zero grads, run a full forward/backward, and return
/// the loss; `loss_only` evaluates the loss without touching grads.
/// Returns the maximum relative error over all parameters.
double gradient_check(const std::function<double()>& loss_backward,
                      const std::function<double()>& loss_only,
                      const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                      double step = 1e-5);

/// Checkpoint format: magic "DDCENET1", an architecture line, then the
/// parameter tensors row-major as float32.
void save_params(const std::string& path, const std::string& arch,
                 const std::vector<TensorRef>& params);
std::string load_params(const std::string& path, const std::vector<TensorRef>& params);
std::string peek_arch(const std::string& path);

void save_loss_history(const std::string& path, const std::vector<double>& losses);

}  // namespace ddce::nn
