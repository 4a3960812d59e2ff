// Read-only polls run in parallel; the scale pass orders against them on
// both sides.
int poll(const int* d, int n) {
    int s = 0;
    for (int i = 0; i < n; i = i + 1) {
        s = s + d[i];
    }
    return s;
}

void scale(int* d, int n, int k) {
    for (int i = 0; i < n; i = i + 1) {
        d[i] = d[i] * k;
    }
}

int main() {
    int d[5];
    for (int i = 0; i < 5; i = i + 1) {
        d[i] = i + 1;
    }
    int a = poll(d, 5);
    int b = poll(d, 5);
    scale(d, 5, 2);
    int c = poll(d, 5);
    return (a + b + c) % 251;
}
