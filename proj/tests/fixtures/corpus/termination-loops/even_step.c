extern int __VERIFIER_nondet_int(void);
int main() {
   int x;
   x = __VERIFIER_nondet_int();

   while (x % 2 == 0) {
      x = x + 2;
  }
   return 0;
}
