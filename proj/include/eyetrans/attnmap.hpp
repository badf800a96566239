#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eyetrans/trainer.hpp"

namespace eyetrans {

// First-encoder-block attention of one sample, per head.
struct AttentionDump {
  std::vector<std::string> labels;  // CLS first for classifiers, then category names
  nn::AttentionTrace<float> heads;
};

// Throws SampleTooLong when the row exceeds the model's token or height caps.
AttentionDump attention_dump(TaskModel& model, const DatasetRow& row, bool baseline);

std::string matrix_csv(const nn::Tensor<float>& m, const std::vector<std::string>& labels);
// ASCII P2; pixel = round(255 * (v - min) / (max - min)), 0 when flat.
std::string matrix_pgm(const nn::Tensor<float>& m);
// Monochrome ramp, darker is larger, labels on both axes.
std::string matrix_svg(const nn::Tensor<float>& m, const std::vector<std::string>& labels, const std::string& title);

// Shannon entropy (nats) of each row.
std::vector<double> row_entropy(const nn::Tensor<float>& weights);

// head{h}_{pre,post}.{csv,pgm,svg}; returns the written paths.
std::vector<std::filesystem::path> export_attention(const std::filesystem::path& dir, const AttentionDump& dump,
                                                    const std::string& prefix = "");

// Post-softmax difference (eyetrans - baseline) per head in all three
// formats, plus entropy.csv with per-row entropies of both.
std::vector<std::filesystem::path> export_paired(const std::filesystem::path& dir, const AttentionDump& eyetrans,
                                                 const AttentionDump& baseline);

}  // namespace eyetrans
