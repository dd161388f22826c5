#include "ncore/atom.hpp"

#include "ncore/xml.hpp"

namespace ncore {

std::string atom_feed(const std::string& feed_id, const std::string& title,
                      Timestamp updated, const std::string& self_href,
                      const std::optional<std::string>& next_href,
                      const std::vector<AtomEntry>& entries) {
  std::string out;
  out.reserve(512 + entries.size() * 256);
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<feed xmlns=\"http://www.w3.org/2005/Atom\">\n";
  out += "  <id>" + xml_escape(feed_id) + "</id>\n";
  out += "  <title>" + xml_escape(title) + "</title>\n";
  out += "  <updated>" + format_rfc3339(updated) + "</updated>\n";
  out += "  <link rel=\"self\" href=\"" + xml_escape_attr(self_href) + "\"/>\n";
  if (next_href) {
    out += "  <link rel=\"next\" href=\"" + xml_escape_attr(*next_href) + "\"/>\n";
  }
  for (const AtomEntry& e : entries) {
    out += "  <entry>\n";
    out += "    <id>" + xml_escape(e.id) + "</id>\n";
    out += "    <title>" + xml_escape(e.title) + "</title>\n";
    out += "    <updated>" + format_rfc3339(e.updated) + "</updated>\n";
    if (e.link) {
      out += "    <link rel=\"alternate\" href=\"" + xml_escape_attr(*e.link) + "\"/>\n";
    }
    if (e.summary) {
      out += "    <summary>" + xml_escape(*e.summary) + "</summary>\n";
    }
    out += "  </entry>\n";
  }
  out += "</feed>\n";
  return out;
}

}  // namespace ncore
