#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/perturb/catalog.hpp"
#include "unseen/perturb/zones.hpp"

namespace unseen::perturb {

/// One insertion: catalog character `id` goes before original index `pos`.
/// pos == -1 is a no-op.
struct InsertionGene {
  static constexpr std::int64_t kSentinel = -1;

  std::int64_t pos = kSentinel;
  std::size_t id = 0;

  bool is_sentinel() const noexcept { return pos == kSentinel; }
  bool operator==(const InsertionGene&) const = default;
};

struct Genome {
  std::vector<InsertionGene> genes;

  std::size_t size() const noexcept { return genes.size(); }
  std::size_t insertion_count() const noexcept;
  bool operator==(const Genome&) const = default;

  static Genome sentinels(std::size_t length, std::size_t id = 0);
};

// Throws InvalidGene (with the offending gene index) unless every gene has
// -1 <= pos <= text_length and id < catalog_size.
void validate_genome(const Genome& genome, std::size_t text_length, std::size_t catalog_size);

/// Inserts one catalog character per non-sentinel gene. Original code points
/// keep their order; genes sharing a position land in gene-list order.
std::u32string apply_genome(std::u32string_view text, const Genome& genome,
                            const InvisibleCatalog& catalog);
std::string apply_genome_utf8(std::string_view text, const Genome& genome,
                              const InvisibleCatalog& catalog);

// Sets every gene whose position falls outside the zones to the sentinel.
void constrain_to_zones(Genome& genome, const SafetyZones& zones);

/// Genes for a single character at every other insertion position.
/// With `zones == nullptr` the whole text is used (positions 0, 2, ..., <= len);
/// otherwise each span contributes start, start + 2, ... < end, so every
/// occurrence of a zoned identifier receives the same pattern. The result is
/// padded with sentinels to at least `min_length` genes. An empty text in
/// whole-text mode yields a single sentinel; empty zones throw EmptyZones.
Genome every_other_position_genome(std::u32string_view text, std::size_t char_id,
                                   const InvisibleCatalog& catalog,
                                   const SafetyZones* zones = nullptr,
                                   std::size_t min_length = 0);

}  // namespace unseen::perturb
