extern int __VERIFIER_nondet_int(void);
int main() {
   int i, j;
   j = 0;
   for (i = 0; i < 10; i++) {
      j = j + 1;
  }
   return 0;
}
