#ifndef BNN_IO_HPP
#define BNN_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bnn/assess.hpp"
#include "bnn/combine.hpp"
#include "bnn/draws.hpp"
#include "bnn/model.hpp"

namespace bnn::io {

// Writes text atomically: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

// Draws on disk: raw little-endian float64, column-major, with a JSON header
// (<stem>.json) describing shape, layout, source and seed.
void write_draws(const std::filesystem::path& bin_path, const PosteriorDraws& draws,
                 std::uint64_t seed);
PosteriorDraws read_draws(const std::filesystem::path& bin_path);

// Dataset cache: CSV (x0..x{d-1}, y0..) plus a JSON sidecar with provenance.
void write_dataset_csv(const std::filesystem::path& csv_path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& csv_path);

// ElpdResult <-> JSON ({model_id, method, total, se, pointwise[], khat[]}).
std::string elpd_to_json(const assess::ElpdResult& result);
assess::ElpdResult elpd_from_json(const std::string& text);

// FNV-1a hash of a canonical string; used to stamp output rows with the
// configuration they came from.
std::uint64_t fnv1a(const std::string& text);
std::string hash_hex(const std::string& text);

}  // namespace bnn::io

#endif  // BNN_IO_HPP
