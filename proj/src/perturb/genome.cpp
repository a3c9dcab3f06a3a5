#include "unseen/perturb/genome.hpp"

#include <algorithm>

#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"

namespace unseen::perturb {

std::size_t Genome::insertion_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(genes.begin(), genes.end(), [](const InsertionGene& g) { return !g.is_sentinel(); }));
}

Genome Genome::sentinels(std::size_t length, std::size_t id) {
  return Genome{std::vector<InsertionGene>(length, InsertionGene{InsertionGene::kSentinel, id})};
}

void validate_genome(const Genome& genome, std::size_t text_length, std::size_t catalog_size) {
  const auto len = static_cast<std::int64_t>(text_length);
  for (std::size_t i = 0; i < genome.genes.size(); ++i) {
    const auto& g = genome.genes[i];
    if (g.pos < InsertionGene::kSentinel || g.pos > len) {
      throw InvalidGene(i, "gene " + std::to_string(i) + ": pos " + std::to_string(g.pos) +
                               " outside [-1, " + std::to_string(len) + "]");
    }
    if (g.id >= catalog_size) {
      throw InvalidGene(i, "gene " + std::to_string(i) + ": id " + std::to_string(g.id) +
                               " outside catalog of size " + std::to_string(catalog_size));
    }
  }
}

std::u32string apply_genome(std::u32string_view text, const Genome& genome,
                            const InvisibleCatalog& catalog) {
  validate_genome(genome, text.size(), catalog.size());

  // (pos, gene index) ascending; equal positions keep gene-list order.
  std::vector<std::pair<std::int64_t, std::size_t>> order;
  order.reserve(genome.genes.size());
  for (std::size_t i = 0; i < genome.genes.size(); ++i) {
    if (!genome.genes[i].is_sentinel()) order.emplace_back(genome.genes[i].pos, i);
  }
  std::sort(order.begin(), order.end());

  std::u32string out;
  out.reserve(text.size() + order.size());
  auto next = order.begin();
  for (std::size_t p = 0; p <= text.size(); ++p) {
    for (; next != order.end() && next->first == static_cast<std::int64_t>(p); ++next) {
      out.push_back(catalog.at(genome.genes[next->second].id));
    }
    if (p < text.size()) out.push_back(text[p]);
  }
  return out;
}

std::string apply_genome_utf8(std::string_view text, const Genome& genome,
                              const InvisibleCatalog& catalog) {
  return encode_utf8(apply_genome(decode_utf8(text), genome, catalog));
}

void constrain_to_zones(Genome& genome, const SafetyZones& zones) {
  for (auto& g : genome.genes) {
    if (!g.is_sentinel() && !zones.contains(g.pos)) g.pos = InsertionGene::kSentinel;
  }
}

Genome every_other_position_genome(std::u32string_view text, std::size_t char_id,
                                   const InvisibleCatalog& catalog, const SafetyZones* zones,
                                   std::size_t min_length) {
  if (char_id >= catalog.size()) {
    throw InvalidGene(0, "char id " + std::to_string(char_id) + " outside catalog");
  }
  Genome genome;
  if (zones == nullptr) {
    if (!text.empty()) {
      for (std::size_t p = 0; p <= text.size(); p += 2) {
        genome.genes.push_back({static_cast<std::int64_t>(p), char_id});
      }
    }
  } else {
    if (zones->empty()) throw Error(Errc::EmptyZones, "no safety zones to insert into");
    for (const auto& span : zones->spans()) {
      for (std::size_t p = span.start; p < span.end && p <= text.size(); p += 2) {
        genome.genes.push_back({static_cast<std::int64_t>(p), char_id});
      }
    }
  }
  const std::size_t target = std::max<std::size_t>({min_length, genome.genes.size(), 1});
  genome.genes.resize(target, InsertionGene{InsertionGene::kSentinel, char_id});
  return genome;
}

}  // namespace unseen::perturb
