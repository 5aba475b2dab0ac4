#include "qptv2/cli.hpp"

int main(int argc, char** argv) { return qptv2::dispatch(argc, argv); }
