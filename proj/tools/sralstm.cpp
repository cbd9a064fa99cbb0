#include <sralstm/cli.hpp>

int main(int argc, char** argv) { return sralstm::cli::run(argc, argv); }
