int f(const int& x) {
    return x * 2;
}

void sink(const int& a, int& out) {
    out = a;
}

void g(const int& x, int& out) {
    #pragma omp taskgroup
    {
    int y;
    #pragma omp task depend(in:x) depend(inout:y) default(shared)
    {
        y = f(x);
    }
    #pragma omp task depend(in:y) depend(inout:out) default(shared)
    {
        sink(y, out);
    }
    }
}
