// SPDX-License-Identifier: Apache-2.0
#include "geoannot/cli.hpp"

int main(int argc, char** argv) { return geoannot::run_cli(argc, argv); }
