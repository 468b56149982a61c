#include "cli_app.hpp"

int main(int argc, char** argv) { return ddls::cli::run(argc, argv); }
