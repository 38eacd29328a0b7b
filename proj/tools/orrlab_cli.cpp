// placeholder; full CLI added with the cli module
#include <cstdio>
int main() { std::puts("orrlab: experiments not wired yet"); return 1; }
