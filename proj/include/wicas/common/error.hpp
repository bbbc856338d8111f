#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wicas {

enum class Errc {
  // toylm-engine
  BadMagic,
  BadVersion,
  BadHeader,
  TruncatedFile,
  TrailingData,
  NonFiniteWeight,
  TokenOutOfRange,
  ContextOverflow,
  EmptyInput,
  InvalidParams,
  // nn-facade
  ModelNotFound,
  ModelCorrupt,
  InvalidModelId,
  UnknownGraph,
  UnknownContext,
  InvalidState,
  InvalidIndex,
  UnsupportedTensorType,
  InvalidTensor,
  EngineFailure,
  // chain-core
  OutOfGas,
  // contract-runtime
  InvalidWasmMagic,
  InvalidWasmModule,
  UnknownCodeId,
  UnknownContract,
  InvalidMessage,
  InvalidName,
  NameNotFound,
  MissingImport,
  MissingExport,
  GuestTrap,
  // consensus-sim
  NoHonestValidator,
  EmptyVoteSet,
  InvalidScenario,
  MissingHeights,
  // io
  IoError,
  ParseError,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::BadHeader: return "BadHeader";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TrailingData: return "TrailingData";
    case Errc::NonFiniteWeight: return "NonFiniteWeight";
    case Errc::TokenOutOfRange: return "TokenOutOfRange";
    case Errc::ContextOverflow: return "ContextOverflow";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ModelNotFound: return "ModelNotFound";
    case Errc::ModelCorrupt: return "ModelCorrupt";
    case Errc::InvalidModelId: return "InvalidModelId";
    case Errc::UnknownGraph: return "UnknownGraph";
    case Errc::UnknownContext: return "UnknownContext";
    case Errc::InvalidState: return "InvalidState";
    case Errc::InvalidIndex: return "InvalidIndex";
    case Errc::UnsupportedTensorType: return "UnsupportedTensorType";
    case Errc::InvalidTensor: return "InvalidTensor";
    case Errc::EngineFailure: return "EngineFailure";
    case Errc::OutOfGas: return "OutOfGas";
    case Errc::InvalidWasmMagic: return "InvalidWasmMagic";
    case Errc::InvalidWasmModule: return "InvalidWasmModule";
    case Errc::UnknownCodeId: return "UnknownCodeId";
    case Errc::UnknownContract: return "UnknownContract";
    case Errc::InvalidMessage: return "InvalidMessage";
    case Errc::InvalidName: return "InvalidName";
    case Errc::NameNotFound: return "NameNotFound";
    case Errc::MissingImport: return "MissingImport";
    case Errc::MissingExport: return "MissingExport";
    case Errc::GuestTrap: return "GuestTrap";
    case Errc::NoHonestValidator: return "NoHonestValidator";
    case Errc::EmptyVoteSet: return "EmptyVoteSet";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::MissingHeights: return "MissingHeights";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(errc_name(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wicas
