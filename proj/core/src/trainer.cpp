#include "chadkit/trainer.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "chadkit/errors.hpp"
#include <nlohmann/json.hpp>

namespace chadkit::train {

using model::Batch;
using model::Matrix;

void TrainSchedule::validate() const {
  if (phase1_epochs < 0 || phase2_epochs < 0 || phase3_epochs < 0) {
    throw ConfigError("phase epoch counts must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(gamma_max >= 1.0)) throw ConfigError("gamma_max must be >= 1");
  if (negatives.negatives_per_record < 1) throw ConfigError("negatives per record must be >= 1");
  if (!(negatives.delta > 0.0)) throw ConfigError("delta must be > 0");
}

Gates gates_for(int phase, std::size_t batch_index) {
  switch (phase) {
    case 1: return {true, false};
    case 2: return {true, batch_index % 2 == 0};
    case 3: return {false, true};
    default: throw ConfigError("training phase must be 1, 2 or 3");
  }
}

double lambda_for(int phase, int epoch) {
  switch (phase) {
    case 1: return 1.0;
    case 2: return std::exp(-static_cast<double>(epoch));
    case 3: return 0.0;
    default: throw ConfigError("training phase must be 1, 2 or 3");
  }
}

double gamma_for(const TrainSchedule& schedule, int phase, int epoch) {
  if (phase != 3) return 1.0;
  if (schedule.phase3_epochs <= 1) return schedule.gamma_max;
  const double frac = static_cast<double>(epoch) / static_cast<double>(schedule.phase3_epochs - 1);
  return 1.0 + (schedule.gamma_max - 1.0) * frac;
}

double combine_joint_loss(Gates gates, double lambda, double reconstruction, double estimator) {
  double total = 0.0;
  if (gates.reconstruction) total += lambda * reconstruction;
  if (gates.estimator) total += estimator;
  return total;
}

ModelGrad ModelGrad::for_model(const model::ChadModel& m) {
  return {m.autoencoder.make_grad(), m.estimator.mlp().make_grad()};
}

void ModelGrad::zero() {
  autoencoder.zero();
  estimator.zero();
}

JointLoss joint_loss(const model::ChadModel& m, const Batch& batch, const Batch& negatives,
                     const JointLossOptions& opt, ModelGrad* grad) {
  JointLoss out;
  const auto& ae = m.autoencoder;
  Rng* ae_dropout = opt.autoencoder_trainable ? opt.dropout_rng : nullptr;
  const bool ae_grad = grad && opt.autoencoder_trainable;

  const auto pos = ae.forward(batch, ae_dropout, opt.gates.reconstruction);
  Matrix d_latent_pos = Matrix::Zero(pos.latent.rows(), pos.latent.cols());

  if (opt.gates.reconstruction) {
    const auto rec = nn::mse_loss(pos.transformed, pos.reconstruction);
    out.reconstruction = rec.value;
    if (ae_grad) {
      d_latent_pos += ae.backward_decoder(pos, opt.lambda * rec.grad, grad->autoencoder);
    }
  }

  if (opt.gates.estimator) {
    const Eigen::Index b = batch.size();
    const Eigen::Index k = opt.negatives_per_record;
    if (negatives.size() != b * k) {
      throw SchemaError("joint_loss: expected " + std::to_string(b * k) + " negatives, got " +
                        std::to_string(negatives.size()));
    }
    const auto neg = ae.forward(negatives, ae_dropout, false);
    Matrix neg_latent = neg.latent;
    if (opt.noise) {
      if (opt.noise->rows() != neg_latent.rows() || opt.noise->cols() != neg_latent.cols()) {
        throw SchemaError("joint_loss: secondary noise has the wrong shape");
      }
      neg_latent += *opt.noise;
    }
    // One estimator pass over [positives | negatives].
    Matrix est_in(pos.latent.rows(), b + b * k);
    est_in.leftCols(b) = pos.latent;
    est_in.rightCols(b * k) = neg_latent;
    nn::Mlp::Tape tape;
    const Matrix f = m.estimator.mlp().forward(est_in, &tape, opt.dropout_rng);
    const Eigen::RowVectorXd f_pos = f.leftCols(b);
    const Matrix f_neg = Eigen::Map<const Matrix>(f.data() + b, k, b);
    const auto est = model::estimator_loss(f_pos, f_neg, opt.gamma);
    out.estimator = est.value;

    if (grad) {
      Matrix d_f(1, b + b * k);
      d_f.leftCols(b) = est.d_positive;
      d_f.rightCols(b * k) = Eigen::Map<const Matrix>(est.d_negative.data(), 1, b * k);
      const Matrix d_in = m.estimator.mlp().backward(tape, d_f, grad->estimator);
      if (ae_grad) {
        d_latent_pos += d_in.leftCols(b);
        ae.backward_encoder(negatives, neg, d_in.rightCols(b * k), grad->autoencoder);
      }
    }
  }

  if (ae_grad) ae.backward_encoder(batch, pos, d_latent_pos, grad->autoencoder);
  out.total = combine_joint_loss(opt.gates, opt.lambda, out.reconstruction.value_or(0.0),
                                 out.estimator.value_or(0.0));
  return out;
}

std::string TrainLogEntry::to_json() const {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["batch"] = batch;
  j["gates"] = {gates.reconstruction ? 1 : 0, gates.estimator ? 1 : 0};
  j["lambda"] = lambda;
  j["gamma"] = gamma;
  j["L_R"] = reconstruction_loss ? nlohmann::ordered_json(*reconstruction_loss) : nlohmann::ordered_json(nullptr);
  j["L_est"] = estimator_loss ? nlohmann::ordered_json(*estimator_loss) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

Trainer::Trainer(model::ChadModel& model, const data::Dataset& train, TrainSchedule schedule,
                 SeedStreams seeds)
    : model_(model),
      train_(train),
      schedule_(std::move(schedule)),
      seeds_(seeds),
      sampler_(schedule_.negatives, model.arities(),
               static_cast<int>(model.schema.continuous_count())),
      ae_opt_(std::as_const(model.autoencoder).params()),
      est_opt_(std::as_const(model.estimator).mlp().params()) {
  schedule_.validate();
  if (train_.vocabularies.size() != model.vocabularies.size()) {
    throw SchemaError("training data and model disagree on categorical fields");
  }
}

void Trainer::run_phase1() { run_phase(1, schedule_.phase1_epochs); }
void Trainer::run_phase2() { run_phase(2, schedule_.phase2_epochs); }
void Trainer::run_phase3() { run_phase(3, schedule_.phase3_epochs); }

void Trainer::run() {
  run_phase1();
  run_phase2();
  run_phase3();
}

void Trainer::run_phase(int phase, int epochs) {
  const auto& records = train_.records;
  const int k = schedule_.negatives.negatives_per_record;
  const data::BatchIterator batches(records.size(), static_cast<std::size_t>(schedule_.batch_size),
                                    derive_seed(seeds_.shuffle, static_cast<std::uint64_t>(phase)));
  ModelGrad grad = ModelGrad::for_model(model_);
  const int latent = model_.autoencoder.latent_dim();

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lambda = lambda_for(phase, epoch);
    const double gamma = gamma_for(schedule_, phase, epoch);
    const std::uint64_t epoch_key = (static_cast<std::uint64_t>(phase) << 32) |
                                    static_cast<std::uint64_t>(epoch);
    const auto order = batches.epoch(static_cast<std::size_t>(epoch));
    for (std::size_t bi = 0; bi < order.size(); ++bi) {
      const auto& idx = order[bi];
      const Gates gates = gates_for(phase, bi);
      const Batch batch = model::make_batch(records, idx);

      Batch negatives;
      Matrix noise;
      if (gates.estimator) {
        std::vector<data::Record> negs;
        negs.reserve(idx.size() * static_cast<std::size_t>(k));
        for (auto i : idx) {
          auto g = sampler_.generate(records[i], seeds_.negsampler, epoch_key);
          for (auto& r : g) negs.push_back(std::move(r));
        }
        negatives = model::make_batch(negs);
        if (schedule_.secondary_noise) {
          Rng noise_rng(derive_seed(seeds_.noise, epoch_key, bi));
          noise = model::standard_normal(latent, negatives.size(), noise_rng);
        }
      }

      Rng dropout_rng(derive_seed(seeds_.dropout, epoch_key, bi));
      JointLossOptions opt;
      opt.gates = gates;
      opt.lambda = lambda;
      opt.gamma = gamma;
      opt.negatives_per_record = k;
      opt.noise = noise.size() > 0 ? &noise : nullptr;
      opt.dropout_rng = &dropout_rng;
      opt.autoencoder_trainable = phase != 3;

      grad.zero();
      const JointLoss loss = joint_loss(model_, batch, negatives, opt, &grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream os;
        os << "non-finite loss in phase " << phase << " epoch " << epoch << " batch " << bi
           << " (L_R=" << loss.reconstruction.value_or(0.0)
           << ", L_est=" << loss.estimator.value_or(0.0) << ")";
        throw NumericError(os.str());
      }
      try {
        if (phase != 3) {
          nn::adam_step(ae_opt_, model_.autoencoder.params(), std::as_const(grad.autoencoder).params(),
                        schedule_.learning_rate);
        }
        if (gates.estimator) {
          nn::adam_step(est_opt_, model_.estimator.mlp().params(), std::as_const(grad.estimator).params(),
                        schedule_.learning_rate);
        }
      } catch (const NumericError& e) {
        std::ostringstream os;
        os << "phase " << phase << " epoch " << epoch << " batch " << bi << ": " << e.what();
        throw NumericError(os.str());
      }

      if (on_batch) {
        on_batch(TrainLogEntry{phase, epoch, bi, gates, lambda, gamma, loss.reconstruction,
                               loss.estimator});
      }
    }
  }
  if (on_phase_end) on_phase_end(phase, model_);
}

}  // namespace chadkit::train
