#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>
int main(int argc, char** argv) { doctest::Context ctx; ctx.run(); (void)argc; (void)argv; return 0; }
TEST_CASE("placeholder") { CHECK(true); }
