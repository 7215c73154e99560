#include "citadel/errors.hpp"

#include <exception>

namespace citadel {

ExitCode exit_code_for_current_exception() noexcept {
  try {
    throw;
  } catch (const ConfigError&) {
    return ExitCode::kConfig;
  } catch (const DataError&) {
    return ExitCode::kData;
  } catch (const NumericError&) {
    return ExitCode::kNumeric;
  } catch (...) {
    return ExitCode::kFailure;
  }
}

}  // namespace citadel
