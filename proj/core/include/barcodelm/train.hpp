#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "barcodelm/cnn.hpp"
#include "barcodelm/encoder.hpp"
#include "barcodelm/model_io.hpp"
#include "barcodelm/vocab.hpp"

namespace barcodelm {

enum class Precision { kSingle, kDouble };

Precision precision_from_string(const std::string& s);
const char* to_string(Precision p);

struct TrainSpec {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double mask_ratio = 0.5;
  std::uint64_t seed = 0;
  Precision precision = Precision::kSingle;
};

struct MetricsRow {
  int epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double learning_rate = 0.0;
};

// `epoch,step,loss,accuracy,lr` CSV with a header row.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

struct PretrainResult {
  ModelParameters model;
  std::vector<MetricsRow> steps;
  std::vector<double> epoch_mean_loss;
};

// Masked-token pretraining: AdamW with a linear schedule over
// epochs * ceil(N / batch_size) steps, per-epoch seeded shuffles.
// on_epoch_end (optional) receives (epoch, snapshot) after each epoch.
PretrainResult run_mlm_pretraining(
    const std::vector<std::string>& sequences, const Vocabulary& vocab,
    const EncoderConfig& config, const TrainSpec& spec,
    const std::function<void(int, const ModelParameters&)>& on_epoch_end = nullptr);

struct LabeledSequences {
  std::vector<std::string> sequences;
  std::vector<std::int32_t> labels;       // contiguous class ids
  std::vector<std::string> class_names;   // class id -> label string
};

enum class SupervisedKind { kTransformerWithHead, kCnn };

struct SupervisedSpec {
  int epochs = 12;
  int batch_size = 32;
  double learning_rate = 5e-3;  // transformer default (SGD)
  std::uint64_t seed = 0;
  Precision precision = Precision::kSingle;
  double lr_decay = 0.5;   // step schedule (transformer)
  int lr_period = 3;
};

struct SupervisedResult {
  ModelParameters model;  // best-validation snapshot (final when no validation)
  std::vector<MetricsRow> steps;
  std::vector<double> epoch_val_accuracy;  // empty when no validation set
  double best_val_accuracy = 0.0;
};

// Transformer fine-tuning: SGD with a step schedule, cross-entropy on the
// two-layer head over pooled embeddings, end to end through the encoder.
// `pretrained` must hold transformer tensors; a fresh head is attached when
// none is present.
SupervisedResult run_supervised_training(const ModelParameters& pretrained,
                                         const LabeledSequences& train,
                                         const LabeledSequences& val, const Vocabulary& vocab,
                                         const EncoderConfig& config, const SupervisedSpec& spec);

// CNN baseline: AdamW with a linear schedule over one-hot input.
SupervisedResult run_cnn_training(const CnnConfig& config, const LabeledSequences& train,
                                  const LabeledSequences& val, const SupervisedSpec& spec);

// Evaluation-mode class predictions (dropout off, running batch-norm stats).
std::vector<std::int32_t> classify_sequences(const ModelParameters& model,
                                             const std::vector<std::string>& sequences,
                                             int batch_size = 32);

}  // namespace barcodelm
