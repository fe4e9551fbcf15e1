#include "ratebv/cli.hpp"

int main(int argc, char** argv)
{
    return ratebv::run_cli(argc, argv);
}
