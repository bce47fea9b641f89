#include <cstdio>
int main() { std::puts("deeplog: under construction"); return 1; }
