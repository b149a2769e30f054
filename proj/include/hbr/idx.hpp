#ifndef HBR_IDX_HPP
#define HBR_IDX_HPP

#include <hbr/raster.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

enum class IdxErrorKind { Io, MagicMismatch, Truncated, DimensionMismatch };

class IdxError : public std::runtime_error {
public:
    IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), _kind(kind) {}
    IdxErrorKind kind() const { return _kind; }

private:
    IdxErrorKind _kind;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
};

/// Parses the big-endian header at the front of `bytes`; throws on a short
/// header or a magic other than `expected_magic`.
IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);

struct Dataset {
    std::vector<Image28> images;
    std::vector<std::uint8_t> labels; ///< empty when no label file was given
};

/// In-memory parsers (raw, uncompressed bytes).
std::vector<Image28> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Reads a file, transparently inflating gzip.
std::vector<std::uint8_t> read_maybe_gzip(const std::string& path);

Dataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path = std::nullopt);

} // namespace hbr

#endif
