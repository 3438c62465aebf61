#pragma once

// Five small parsed sentences with hand-enumerated segmentations and blocks.

#include <vector>

#include "seqinfer/dependency.hpp"

namespace seqinfer::testing {

struct TreeFixture {
  DependencyTree tree;
  std::vector<std::size_t> major, surrounding;
  Span e1, e2;
  std::vector<std::size_t> block1, block2;
};

inline std::vector<TreeFixture> tree_fixtures() {
  std::vector<TreeFixture> f;
  // single token: e1 = e2 is not allowed, so both blocks are checked through entity_block
  f.push_back({{{"go"}, {0}, {"root"}, {"VB"}}, {1}, {}, {1, 1}, {1, 1}, {1}, {1}});
  f.push_back({{{"the", "man", "went"}, {2, 3, 0}, {"det", "nsubj", "root"}, {"DT", "NN", "VBD"}},
               {2, 3}, {1}, {2, 2}, {3, 3}, {1, 2, 3}, {2, 3}});
  f.push_back({{{"a", "b", "c"}, {2, 0, 2}, {"nsubj", "root", "obj"}, {"X", "Y", "Z"}},
               {1, 2, 3}, {}, {1, 1}, {3, 3}, {1, 2, 3}, {1, 2, 3}});
  f.push_back({{{"John", "gave", "Mary", "a", "book", "yesterday"},
                {2, 0, 2, 5, 2, 2},
                {"nsubj", "root", "iobj", "det", "obj", "obl"},
                {"NNP", "VBD", "NNP", "DT", "NN", "NN"}},
               {1, 2, 3, 5}, {4, 6}, {1, 1}, {5, 5}, {1, 2, 3, 5, 6}, {1, 2, 3, 4, 5, 6}});
  f.push_back({{{"the", "big", "dog", "chased", "a", "small", "cat"},
                {3, 3, 4, 0, 7, 7, 4},
                {"det", "amod", "nsubj", "root", "det", "amod", "obj"},
                {"DT", "JJ", "NN", "VBD", "DT", "JJ", "NN"}},
               {3, 4, 7}, {1, 2, 5, 6}, {2, 3}, {6, 7}, {1, 2, 3, 4, 7}, {3, 4, 5, 6, 7}});
  return f;
}

}  // namespace seqinfer::testing
