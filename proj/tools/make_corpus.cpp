// Writes the deterministic synthetic ABC corpus used by the tests.
//   dshl-synth-corpus out.abc [tunes] [seed]
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "synthetic_corpus.h"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: dshl-synth-corpus <out.abc> [tunes] [seed]\n";
    return 1;
  }
  dshl::testing::SyntheticOptions opt;
  if (argc > 2) opt.tunes = std::atoi(argv[2]);
  if (argc > 3) opt.seed = std::strtoull(argv[3], nullptr, 10);
  std::ofstream out(argv[1]);
  out << dshl::testing::synthetic_corpus(opt);
  return out ? 0 : 2;
}
