// Standalone finite-model solver speaking the SMT-LIB style protocol on
// stdin/stdout, or on a script file passed as the single argument.

#include <fstream>
#include <iostream>

#include "qivc/fm/smtlib.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  if (argc > 2) {
    std::cerr << "usage: qivc-smt [script.smt2]" << std::endl;
    return 1;
  }
  if (argc == 2) {
    std::ifstream f(argv[1]);
    if (!f) {
      std::cerr << "cannot open '" << argv[1] << "'" << std::endl;
      return 1;
    }
    qivc::fm::SmtRepl repl(f, std::cout);
    return repl.run();
  }
  qivc::fm::SmtRepl repl(std::cin, std::cout);
  return repl.run();
}
