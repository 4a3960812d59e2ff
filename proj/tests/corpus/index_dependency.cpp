// Tasks capture a mutating index; syncs before each host increment keep
// the written slots distinct.
void write_cell(int* a, int i, int v) {
    a[i] = v;
}

int main() {
    int a[4];
    a[0] = 0;
    a[1] = 0;
    a[2] = 0;
    a[3] = 0;
    int i = 0;
    write_cell(a, i, 5);
    i = i + 1;
    write_cell(a, i, 7);
    i = i + 1;
    write_cell(a, i, 9);
    return a[0] * 1 + a[1] * 2 + a[2] * 3 + a[3] * 4;
}
