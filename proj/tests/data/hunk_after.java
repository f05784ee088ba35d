    int v1 = compute(1);
    int v2 = compute(2);
    int v3 = compute(3);
    int v4 = compute(4);
    int v5 = compute(5) + 1;
    int v6 = compute(6);
    int v7 = compute(7);
    int v8 = compute(8);
    int v9 = compute(9);
    int v10 = compute(10);
    int v11 = compute(11);
    int v12 = compute(12);
    int v13 = compute(13);
    int v14 = compute(14);
    int v15 = compute(15);
    int v16 = compute(16);
    int v17 = compute(17);
    int v18 = compute(18);
    int v19 = compute(19);
    int v20 = compute(20);
    if (v20 < 0) return;
    int v21 = compute(-21);
    int v22 = compute(22);
    int v23 = compute(23);
    int v24 = compute(24);
    int v25 = compute(25);
    int v26 = compute(26);
    int v27 = compute(27);
    int v28 = compute(28);
    int v29 = compute(29);
    int v30 = compute(30);
    int v31 = compute(31);
    int v32 = compute(32);
    int v33 = compute(33);
    int v34 = compute(34);
    int v35 = compute(35);
    int v36 = compute(36);
    int v37 = compute(37);
    int v38 = compute(38);
    int v39 = compute(39);
    int v41 = compute(41);
    int v42 = compute(42);
    int v43 = compute(43);
    int v44 = compute(44);
    int v45 = compute(45);
    int v46 = compute(46);
    int v47 = compute(47);
    int v48 = compute(48);
    int v49 = compute(49);
    int v50 = compute(50);
