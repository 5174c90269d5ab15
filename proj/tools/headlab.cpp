#include <cstdio>
int main(){ std::puts("headlab"); return 0; }
