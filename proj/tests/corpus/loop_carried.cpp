// Per-iteration accumulation tasks chained through the shared sum.
void add_cell(int& sum, const int* data, int i) {
    sum = sum + data[i];
}

int main() {
    int data[6];
    for (int i = 0; i < 6; i = i + 1) {
        data[i] = i * i + 1;
    }
    int sum = 0;
    for (int i = 0; i < 6; i = i + 1) {
        add_cell(sum, data, i);
    }
    return sum;
}
