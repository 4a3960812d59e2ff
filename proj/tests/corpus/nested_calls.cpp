// A nested call hoists into a temp task feeding the outer task.
int f(const int& x) {
    return x + 1;
}

int g(const int& x) {
    return x * 2;
}

int main() {
    int r = g(f(4));
    return r;
}
