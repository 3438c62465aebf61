#pragma once

// Dependency trees, CoNLL-style I/O, major/surrounding segmentation and
// structural block extraction. Token indices are 1-based throughout; head 0
// marks the root.

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace seqinfer {

struct DependencyTree {
  std::vector<std::string> tokens;
  std::vector<std::size_t> heads;
  std::vector<std::string> deprels;
  std::vector<std::string> pos;

  std::size_t size() const { return tokens.size(); }
  std::size_t head(std::size_t index) const { return heads.at(index - 1); }
  const std::string& deprel(std::size_t index) const { return deprels.at(index - 1); }
  std::size_t root() const;
  std::vector<std::size_t> children(std::size_t index) const;

  // TreeError on empty tree, ragged fields, out-of-range heads, zero or
  // multiple roots, or a cycle.
  void validate() const;
};

// Reads `index<TAB>form<TAB>pos<TAB>head<TAB>deprel` lines, sentences
// separated by blank lines. Lines starting with '#' are skipped.
std::vector<DependencyTree> read_conll(std::istream& in);
std::vector<DependencyTree> read_conll_file(const std::string& path);
void write_conll(std::ostream& out, const std::vector<DependencyTree>& trees);

struct MsSegmentation {
  std::vector<std::size_t> major;
  std::vector<std::size_t> surrounding;
};

const std::set<std::string>& default_core_roles();

// major = root plus tokens whose deprel is a core role, in sentence order.
MsSegmentation segment_sentence(const DependencyTree& tree,
                                const std::set<std::string>& core_roles = default_core_roles());

// Inclusive 1-based token span.
struct Span {
  std::size_t first = 0;
  std::size_t last = 0;
  bool contains(std::size_t i) const { return i >= first && i <= last; }
  std::size_t length() const { return last - first + 1; }
};

struct BlockSet {
  std::vector<std::size_t> block1;  // block of the first entity argument
  std::vector<std::size_t> block2;
  Span e1;
  Span e2;
};

// Entity tokens plus their parents, siblings (tokens sharing a head with an
// entity token) and children; sentence ordered, deduplicated.
std::vector<std::size_t> entity_block(const DependencyTree& tree, const Span& entity);
BlockSet extract_blocks(const DependencyTree& tree, const Span& e1, const Span& e2);

}  // namespace seqinfer
