#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncore/time.hpp"

namespace ncore {

// One feed entry. `id` must already be a stable identifier (handle text or
// URL); the formatter does not invent ids.
struct AtomEntry {
  std::string id;
  std::string title;
  Timestamp updated = 0;
  std::optional<std::string> link;   // rel="alternate"
  std::optional<std::string> summary;
};

// Renders an Atom 1.0 feed document. `next_href`, when present, becomes a
// rel="next" link for paged feeds.
std::string atom_feed(const std::string& feed_id, const std::string& title,
                      Timestamp updated, const std::string& self_href,
                      const std::optional<std::string>& next_href,
                      const std::vector<AtomEntry>& entries);

}  // namespace ncore
