#pragma once

#include <iosfwd>
#include <string>

#include "stencilml/labeling.hpp"

namespace stencilml {

inline constexpr int kDatasetFormatVersion = 1;

/// Line 1 is a JSON metadata header, then one record per line:
/// `s,x_1,y_1,...,x_s,y_s,epsilon,class` with 17 significant digits and class in 1..4.
void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const std::string& path, const Dataset& ds);

/// Throws ParseError naming the offending line; rejects unknown format versions.
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
Dataset read_dataset(const std::string& path);

/// FNV-1a hash of the serialized dataset, used to recognise a checkpoint's training data.
std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace stencilml
