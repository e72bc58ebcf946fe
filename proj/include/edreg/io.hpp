#pragma once

#include "edreg/registration.hpp"
#include "edreg/types.hpp"

#include <json.hpp>

#include <string>

namespace edreg::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed 17-significant-digit decimal formatting used for every CSV value,
/// so re-running a command reproduces output files byte for byte.
std::string format_double(double value);

/// Headerless CSV, one point per row, comma-separated decimal fields with
/// '.' separator; d is inferred from the first row.
PointCloud read_point_cloud_csv(const std::string& path);
void write_point_cloud_csv(const std::string& path, const PointCloud& cloud);

/// Parses a RegistrationConfig from a JSON document that mirrors the struct
/// field for field. Unknown keys are errors; missing keys take defaults.
RegistrationConfig parse_registration_config(const nlohmann::ordered_json& doc);
RegistrationConfig load_registration_config(const std::string& path);

}  // namespace edreg::io
