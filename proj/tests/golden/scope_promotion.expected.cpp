void touch(int& v) {
    v += 1;
}

void h(int& z) {
    #pragma omp taskgroup
    {
    if (z > 0) {
        int* apac_ptr_var1 = new int();
        int& var1 = *apac_ptr_var1;
        int& var2 = z;
        #pragma omp task depend(inout:var1) default(shared)
        {
            touch(var1);
        }
        #pragma omp task depend(inout:var2) default(shared) firstprivate(var2)
        {
            touch(var2);
        }
        #pragma omp task depend(inout:var1) firstprivate(apac_ptr_var1) default(shared)
        {
            delete apac_ptr_var1;
        }
    }
    }
}
