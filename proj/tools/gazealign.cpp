#include <iostream>

#include "gazealign/pipeline.hpp"

int main(int argc, char** argv) { return gazealign::cli_main(argc, argv, std::cout, std::cerr); }
