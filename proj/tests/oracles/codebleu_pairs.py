# (prediction, reference) pairs for the CodeBLEU golden file. Tokens are
# space separated so a whitespace split and a lexer agree.

JAVA = [
    ("int x = a + b ;", "int x = a - b ;"),
    ("if ( i < n ) { return i ; }", "if ( i <= n ) { return i ; }"),
    ("return list . size ( ) ;", "return list . size ( ) - 1 ;"),
    ("for ( int i = 0 ; i < n ; i ++ ) { sum += a [ i ] ; }", "for ( int i = 0 ; i <= n ; i ++ ) { sum += a [ i ] ; }"),
    ("String s = name . trim ( ) ;", "String s = name == null ? \"\" : name . trim ( ) ;"),
    ("public int add ( int a , int b ) { return a + b ; }", "public int add ( int a , int b ) { return a + b ; }"),
    ("public int max ( int a , int b ) { if ( a > b ) { return a ; } return b ; }",
     "public int max ( int a , int b ) { if ( a < b ) { return b ; } return a ; }"),
    ("x = y ;", "x = y + 1 ;"),
    ("while ( it . hasNext ( ) ) { Object o = it . next ( ) ; process ( o ) ; }",
     "while ( it . hasNext ( ) ) { Object o = it . next ( ) ; if ( o != null ) { process ( o ) ; } }"),
    ("throw new IllegalStateException ( ) ;", "throw new IllegalArgumentException ( msg ) ;"),
    ("int total = 0 ; for ( int v : values ) { total = total + v ; } return total ;",
     "int total = 0 ; for ( int v : values ) { total += v ; } return total ;"),
    ("public void close ( ) { stream . close ( ) ; }",
     "public void close ( ) throws IOException { if ( stream != null ) { stream . close ( ) ; } }"),
    ("count ++ ;", "count -- ;"),
    ("Map < String , Integer > m = new HashMap < > ( ) ;", "Map < String , Integer > m = new TreeMap < > ( ) ;"),
    ("if ( a && b ) { run ( ) ; }", "if ( a || b ) { run ( ) ; }"),
    ("public boolean isEmpty ( ) { return size == 0 ; }", "public boolean isEmpty ( ) { return size ( ) == 0 ; }"),
    ("int mid = ( lo + hi ) / 2 ;", "int mid = lo + ( hi - lo ) / 2 ;"),
    ("result . add ( item ) ;", "result . addAll ( items ) ;"),
    ("public int f ( int n ) { int r = 1 ; for ( int i = 1 ; i < n ; i ++ ) { r = r * i ; } return r ; }",
     "public int f ( int n ) { int r = 1 ; for ( int i = 1 ; i <= n ; i ++ ) { r = r * i ; } return r ; }"),
    ("double d = x / y ;", "double d = ( double ) x / y ;"),
]

PYTHON = [
    ("x = a + b", "x = a - b"),
    ("x = 1\ny = x + 2", "x = 1\ny = x - 2"),
    ("def f ( a ) :\n    return a + 1", "def f ( a ) :\n    return a - 1"),
    ("for i in range ( n ) :\n    total += i", "for i in range ( n + 1 ) :\n    total += i"),
    ("if x > 0 :\n    y = x\nelse :\n    y = - x", "if x >= 0 :\n    y = x\nelse :\n    y = - x"),
    ("return len ( items )", "return len ( items ) - 1"),
    ("def add ( a , b ) :\n    return a + b", "def add ( a , b ) :\n    return a + b"),
    ("result = [ x for x in data if x ]", "result = [ x for x in data if x is not None ]"),
    ("while i < n :\n    i = i + 1", "while i < n :\n    i = i + 2"),
    ("name = name . strip ( )", "name = name . strip ( ) . lower ( )"),
    ("try :\n    v = int ( s )\nexcept ValueError :\n    v = 0", "try :\n    v = int ( s )\nexcept ( ValueError , TypeError ) :\n    v = 0"),
    ("def mean ( xs ) :\n    s = sum ( xs )\n    return s / len ( xs )", "def mean ( xs ) :\n    s = sum ( xs )\n    return s / max ( 1 , len ( xs ) )"),
    ("a , b = b , a", "a , b = b , a + b"),
    ("d [ k ] = v", "d [ k ] = d . get ( k , 0 ) + v"),
    ("if key in cache :\n    return cache [ key ]", "if key in cache and cache [ key ] :\n    return cache [ key ]"),
    ("x = y", "x = y + 1"),
    ("with open ( p ) as f :\n    data = f . read ( )", "with open ( p , 'rb' ) as f :\n    data = f . read ( )"),
    ("def g ( n ) :\n    r = 1\n    for i in range ( 1 , n ) :\n        r = r * i\n    return r",
     "def g ( n ) :\n    r = 1\n    for i in range ( 1 , n + 1 ) :\n        r = r * i\n    return r"),
    ("raise ValueError ( msg )", "raise TypeError ( msg )"),
    ("out . append ( item )", "out . extend ( items )"),
]

JAVASCRIPT = [
    ("let x = a + b ;", "let x = a - b ;"),
    ("if ( i < n ) { return i ; }", "if ( i <= n ) { return i ; }"),
    ("return arr . length ;", "return arr . length - 1 ;"),
    ("for ( let i = 0 ; i < n ; i ++ ) { sum += a [ i ] ; }", "for ( let i = 0 ; i <= n ; i ++ ) { sum += a [ i ] ; }"),
    ("const s = name . trim ( ) ;", "const s = name ? name . trim ( ) : '' ;"),
    ("function add ( a , b ) { return a + b ; }", "function add ( a , b ) { return a + b ; }"),
    ("function max ( a , b ) { if ( a > b ) { return a ; } return b ; }",
     "function max ( a , b ) { if ( a < b ) { return b ; } return a ; }"),
    ("x = y ;", "x = y + 1 ;"),
    ("if ( a == b ) { done ( ) ; }", "if ( a === b ) { done ( ) ; }"),
    ("throw new Error ( ) ;", "throw new TypeError ( msg ) ;"),
    ("let total = 0 ; for ( const v of values ) { total = total + v ; }",
     "let total = 0 ; for ( const v of values ) { total += v ; }"),
    ("const el = document . getElementById ( id ) ; el . remove ( ) ;",
     "const el = document . getElementById ( id ) ; if ( el ) { el . remove ( ) ; }"),
    ("count ++ ;", "count -- ;"),
    ("const m = new Map ( ) ;", "const m = new Set ( ) ;"),
    ("if ( a && b ) { run ( ) ; }", "if ( a || b ) { run ( ) ; }"),
    ("var y = parseInt ( s ) ;", "var y = parseInt ( s , 10 ) ;"),
    ("const mid = ( lo + hi ) / 2 ;", "const mid = Math . floor ( ( lo + hi ) / 2 ) ;"),
    ("result . push ( item ) ;", "result . push ( ... items ) ;"),
    ("function f ( n ) { let r = 1 ; for ( let i = 1 ; i < n ; i ++ ) { r = r * i ; } return r ; }",
     "function f ( n ) { let r = 1 ; for ( let i = 1 ; i <= n ; i ++ ) { r = r * i ; } return r ; }"),
    ("let d = x / y ;", "let d = y === 0 ? 0 : x / y ;"),
]

C = [
    ("x = a + b ;", "x = a - b ;"),
    ("if ( i < n ) { return i ; }", "if ( i <= n ) { return i ; }"),
    ("int add ( int a , int b ) { return a + b ; }", "int add ( int a , int b ) { return a + b ; }"),
    ("for ( i = 0 ; i < n ; i ++ ) { sum += a [ i ] ; }", "for ( i = 0 ; i <= n ; i ++ ) { sum += a [ i ] ; }"),
    ("int max ( int a , int b ) { if ( a > b ) { return a ; } return b ; }",
     "int max ( int a , int b ) { if ( a < b ) { return b ; } return a ; }"),
    ("x = y ;", "x = y + 1 ;"),
    ("int f ( int n ) { int r = 1 ; int i ; for ( i = 1 ; i < n ; i ++ ) { r = r * i ; } return r ; }",
     "int f ( int n ) { int r = 1 ; int i ; for ( i = 1 ; i <= n ; i ++ ) { r = r * i ; } return r ; }"),
    ("count ++ ;", "count -- ;"),
    ("if ( a && b ) { run ( ) ; }", "if ( a || b ) { run ( ) ; }"),
    ("p = malloc ( n ) ;", "p = malloc ( n * sizeof ( int ) ) ;"),
    ("free ( p ) ;", "free ( p ) ; p = NULL ;"),
    ("while ( n > 0 ) { n = n / 10 ; d ++ ; }", "while ( n != 0 ) { n = n / 10 ; d ++ ; }"),
    ("int main ( ) { int n ; scanf ( \"%d\" , & n ) ; printf ( \"%d\" , n ) ; return 0 ; }",
     "int main ( ) { long n ; scanf ( \"%ld\" , & n ) ; printf ( \"%ld\" , n ) ; return 0 ; }"),
    ("mid = ( lo + hi ) / 2 ;", "mid = lo + ( hi - lo ) / 2 ;"),
    ("if ( p == NULL ) return ;", "if ( p == NULL ) return - 1 ;"),
    ("void swap ( int * a , int * b ) { int t = * a ; * a = * b ; * b = t ; }",
     "void swap ( int * a , int * b ) { int t = * a ; * a = * b ; * b = * a ; }"),
    ("s [ n ] = 0 ;", "s [ n - 1 ] = 0 ;"),
    ("ans = ans + x ;", "ans = ( ans + x ) % MOD ;"),
    ("int sum ( int * v , int n ) { int s = 0 ; int i ; for ( i = 0 ; i < n ; i ++ ) s += v [ i ] ; return s ; }",
     "int sum ( int * v , int n ) { int s = 0 ; int i ; for ( i = 0 ; i < n ; i ++ ) s = s + v [ i ] ; return s ; }"),
    ("return a * b ;", "return ( long long ) a * b ;"),
]

PAIRS = {"java": JAVA, "python": PYTHON, "javascript": JAVASCRIPT, "c": C}
